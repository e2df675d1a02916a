#ifndef TES_SDRE_FILTER_HPP
#define TES_SDRE_FILTER_HPP

// Continuous-discrete state-dependent Riccati equation filter. Each
// prediction re-evaluates A(x), B(x) at the current estimate, discretizes
// them exactly over the prediction interval and propagates the covariance;
// measurement updates happen every `update_every` predictions.

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "tes/discretization.hpp"
#include "tes/graph.hpp"
#include "tes/soc.hpp"
#include "tes/timeseries.hpp"

namespace tes {

/// Input channel names expected by run_filter.
inline constexpr const char *kMassFlowChannel = "mdot_kg_s";
inline constexpr const char *kInletChannel = "tin_K";

/// Default thermocouple variance [K^2] and process noise [K^2].
inline constexpr double kThermocoupleVariance = 0.007;
inline constexpr double kProcessVariance = 1e-7;

struct NoiseModel {
  Eigen::MatrixXd W; ///< process noise, n x n [K^2]
  Eigen::MatrixXd V; ///< measurement noise, p x p [K^2]

  /// W = process_variance I; V from measurement_noise().
  static NoiseModel standard(int n, const std::vector<Sensor> &sensors,
                             double single_variance = kThermocoupleVariance,
                             double process_variance = kProcessVariance);
  void validate() const;
};

struct FilterState {
  Eigen::VectorXd x_hat; ///< [K]
  Eigen::MatrixXd P;     ///< [K^2]
  long k = 0;
  double t = 0;
};

struct SampleSchedule {
  double dt_predict = 0.0125; ///< [s]
  int update_every = 8;

  double sample_interval() const { return dt_predict * update_every; }
  /// Schedule for `rate` samples per second; throws unless 1/(rate dt) is a
  /// positive integer to within 1e-9.
  static SampleSchedule from_rate(double rate, double dt_predict = 0.0125);
  void validate() const;
};

/// Symmetrizes P and adds 1e-12 I (growing tenfold) until a Cholesky
/// factorization succeeds. Returns the number of jitter additions.
int condition_covariance(Eigen::MatrixXd &p);

/// Propagation through a given discrete step: x = Phi x + Gamma u,
/// P = Phi P Phi^T + W, symmetrized.
FilterState predict(const FilterState &fs, const DiscreteStep<double> &step,
                    double u, const Eigen::MatrixXd &w);

/// One prediction over dt. Throws FilterDivergence on a non-finite estimate.
FilterState predict(const FilterState &fs, const LpvSystem &sys, double mdot,
                    double t_in, const NoiseModel &noise, double dt);

/// K = P C^T (C P C^T + V)^-1 from a Cholesky solve.
Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd &p_pred,
                            const Eigen::MatrixXd &c, const Eigen::MatrixXd &v);

struct UpdateResult {
  FilterState state;
  Eigen::VectorXd innovation;
  Eigen::MatrixXd gain;
  int jitter = 0;
};

/// Measurement update of the predicted state with y.
UpdateResult update(const FilterState &fs, const Eigen::VectorXd &y,
                    const Eigen::MatrixXd &c, const Eigen::MatrixXd &v);

enum class MissingMeasurement { Skip, Abort };

struct FilterRunOptions {
  MissingMeasurement missing = MissingMeasurement::Abort;
  /// Last prediction time; negative means the later of the last input and
  /// the last measurement stamp.
  double end_time = -1;
  /// Called after every step (after the update, if any).
  std::function<void(const FilterState &)> observer;
};

/// One row per step, row 0 is the initial state (after an update at t0 when
/// a measurement is stamped there).
struct FilterTrajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x_hat;
  std::vector<double> soc;
  std::vector<double> trace_p;
  std::vector<double> innovation_norm; ///< NaN on steps without update
  std::vector<Eigen::VectorXd> innovations;
  FilterState final_state;
  int updates = 0;
  int skipped_updates = 0;
  int jitter_events = 0;

  std::size_t size() const { return t.size(); }
  /// Columns: t_s, xhat_1..n_K, soc, trace_P_K2, innovation_norm_K.
  TimeSeries to_timeseries() const;
};

FilterTrajectory run_filter(const FilterState &initial, const LpvSystem &sys,
                            const SampleSchedule &schedule,
                            const TimeSeries &inputs,
                            const TimeSeries &measurements,
                            const NoiseModel &noise, const SocParams &soc,
                            const FilterRunOptions &options = {});

/// Sample autocorrelation of a scalar sequence at `lag`.
double autocorrelation(const std::vector<double> &v, int lag);

} // namespace tes

#endif // TES_SDRE_FILTER_HPP
