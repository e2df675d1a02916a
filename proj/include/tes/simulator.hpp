#ifndef TES_SIMULATOR_HPP
#define TES_SIMULATOR_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tes/graph.hpp"
#include "tes/timeseries.hpp"

namespace tes {

struct OdeConfig {
  double rel_tol = 1e-6;
  double abs_tol = 1e-6; ///< [K]
  double max_dt = 1.0;   ///< [s]
  /// Smallest step relative to |t| + 1 before a StiffnessError is raised.
  double min_relative_dt = 1e-12;

  void validate() const;
};

struct OdeStats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evaluations = 0;
  double smallest_step = std::numeric_limits<double>::infinity();
  double largest_step = 0;
};

using OdeFunction =
    std::function<void(double t, const Eigen::VectorXd &x, Eigen::VectorXd &dx)>;
using StepObserver = std::function<void(double t, const Eigen::VectorXd &x)>;

/// Bogacki-Shampine 3(2) embedded pair with first-same-as-last reuse,
/// local extrapolation and cubic Hermite dense output. The step size carries
/// over between calls.
class Bs23Integrator {
public:
  Bs23Integrator(OdeFunction f, OdeConfig cfg);

  /// Advances x from t0 to t1. `sample_times` (sorted, in [t0, t1]) are
  /// reported through `on_sample` using the dense output; `on_step` sees
  /// every accepted step.
  void integrate(double t0, double t1, Eigen::VectorXd &x,
                 std::span<const double> sample_times = {},
                 const StepObserver &on_sample = {},
                 const StepObserver &on_step = {});

  const OdeStats &stats() const { return stats_; }

private:
  double initial_step(double t0, double t1, const Eigen::VectorXd &x,
                      const Eigen::VectorXd &f0);

  OdeFunction f_;
  OdeConfig cfg_;
  OdeStats stats_;
  double h_ = 0;
};

/// Energy balance right-hand side of the finite-volume model. Constant
/// conductances are computed once; a CPCM conductivity table forces a
/// rebuild on every call.
class FiniteVolumeRhs {
public:
  explicit FiniteVolumeRhs(ThermalModel model);

  /// dT/dt [K/s] for mass flow `mdot` [kg/s] and inlet temperature `t_in`.
  void operator()(const Eigen::VectorXd &x, double mdot, double t_in,
                  Eigen::VectorXd &dx) const;
  Eigen::VectorXd operator()(const Eigen::VectorXd &x, double mdot,
                             double t_in) const;

  const ThermalModel &model() const { return model_; }

private:
  ThermalModel model_;
  std::vector<ThermalEdge> edges_;
};

/// dT/dt of the finite-volume energy balance.
Eigen::VectorXd rhs(const ThermalModel &model, const StateVector &x,
                    double mdot, double t_in);

struct StateTrajectory {
  std::vector<double> t;
  std::vector<StateVector> x;
  std::size_t size() const { return t.size(); }
};

/// Integrates the model driven by zero-order-hold inputs (channels
/// mdot_kg_s and tin_K) from t0 to t1, restarting at every input change,
/// and returns the state on the uniform grid t0 + k dt_out.
StateTrajectory integrate(const ThermalModel &model, const StateVector &x0,
                          const TimeSeries &inputs, const OdeConfig &cfg,
                          double t0, double t1, double dt_out,
                          const StepObserver &on_step = {},
                          OdeStats *stats = nullptr);

/// Same integration, streaming each output sample to `on_sample` instead of
/// storing it.
void integrate_each(const ThermalModel &model, const StateVector &x0,
                    const TimeSeries &inputs, const OdeConfig &cfg, double t0,
                    double t1, double dt_out, const StepObserver &on_sample,
                    const StepObserver &on_step = {},
                    OdeStats *stats = nullptr);

/// Maps each fine cell onto the coarse cell containing it. Column blocks
/// and CPCM layer blocks must have integral size; fluid and plate layers map
/// onto themselves.
class GridProjection {
public:
  GridProjection(const GridSpec &fine, const GridSpec &coarse);

  /// Mass-weighted mean temperature of the fine cells in each coarse cell.
  StateVector operator()(const StateVector &x_fine) const;
  int coarse_cell(int fine_cell) const { return owner_[fine_cell]; }

private:
  std::vector<int> owner_;
  std::vector<double> weight_; // fine mass / coarse-cell mass sum
  int coarse_size_ = 0;
};

StateVector project_fine_to_coarse(const StateVector &x_fine,
                                   const GridSpec &fine,
                                   const GridSpec &coarse);

struct MeasurementChannel {
  std::string name; ///< CSV column, e.g. "tc2a_K"
  int cell = -1;    ///< coarse control volume
  double stddev = 0; ///< [K]
};

struct MeasurementSpec {
  std::vector<MeasurementChannel> channels;
  double sample_rate = 80; ///< [samples/s]
  std::uint64_t seed = 0;
};

/// tc1, tc2a, tc2b, tc3, tc4a, tc4b on the cells of default_sensors(); every
/// raw thermocouple has variance `variance`, so averaged pairs end up with
/// half of it.
MeasurementSpec default_measurement_spec(const GridSpec &coarse,
                                         double variance, double sample_rate,
                                         std::uint64_t seed);

/// y = C x + v at every 1/sample_rate instant of the trajectory.
TimeSeries synthesize_measurements(const StateTrajectory &coarse,
                                   const MeasurementSpec &spec);

/// Per-step RMS error across all control volumes.
std::vector<double> rmse_over_cells(const std::vector<StateVector> &estimate,
                                    const std::vector<StateVector> &truth);

/// RMS error of one channel over all time steps.
double rmse_over_time(std::span<const double> estimate,
                      std::span<const double> reference);

} // namespace tes

#endif // TES_SIMULATOR_HPP
