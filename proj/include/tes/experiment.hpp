#ifndef TES_EXPERIMENT_HPP
#define TES_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tes/config.hpp"
#include "tes/sdre_filter.hpp"
#include "tes/simulator.hpp"
#include "tes/timeseries.hpp"

namespace tes {

/// Raw dataset columns after t_s.
inline const std::vector<std::string> kDatasetChannels{
    "mdot_kg_s", "tc0_K",  "tc1_K",  "tc2a_K", "tc2b_K",
    "tc3_K",     "tc4a_K", "tc4b_K"};

/// mdot_kg_s (held from each step) and tin_K (linear between knots),
/// sampled at `rate` on [0, duration].
TimeSeries make_input_profile(const ProfileSpec &profile, double duration,
                              double rate);

struct TruthRun {
  StateTrajectory coarse;  ///< projected onto the estimator grid
  std::vector<double> soc; ///< evaluated on the fine grid
  OdeStats stats;
};

/// Fine-grid integration from a uniform field at the first inlet
/// temperature, projected to the estimator grid at the input sample times.
TruthRun simulate_truth(const ExperimentConfig &cfg, const TimeSeries &inputs);

/// Truth from chained frozen-in-time steps of `model` itself.
StateTrajectory propagate_frozen(const ThermalModel &model,
                                 const StateVector &x0,
                                 const TimeSeries &inputs, double dt,
                                 double t_end);

/// Noisy thermocouple dataset in the load_dataset layout. tc0 is the inlet
/// temperature without noise.
TimeSeries make_dataset(const ExperimentConfig &cfg, const TimeSeries &inputs,
                        const StateTrajectory &coarse);

/// Reads and validates a dataset CSV and appends the pair means tc2_K and
/// tc4_K.
TimeSeries load_dataset(const std::string &path);
/// Appends tc2_K and tc4_K to a raw dataset.
TimeSeries with_pair_means(TimeSeries dataset);

/// mdot_kg_s and tin_K (from tc0_K) as the filter expects them.
TimeSeries filter_inputs(const TimeSeries &dataset);
/// One column per sensor, in sensor order.
TimeSeries filter_measurements(const TimeSeries &dataset,
                               const std::vector<Sensor> &sensors);

/// Everything a set of estimator runs shares: the dataset and, for
/// twin-sim, the truth.
struct Scenario {
  TimeSeries dataset; ///< full rate, pair means included
  std::optional<TruthRun> truth;
};

Scenario prepare_scenario(const ExperimentConfig &cfg);

struct ChannelError {
  std::string sensor;
  int cell = -1;
  bool withheld = false;
  double rmse_vs_truth = 0;       ///< NaN without truth [K]
  double rmse_vs_measurement = 0; ///< over all full-rate samples [K]
};

struct RunResult {
  std::string label;
  double rate = 0;
  int update_every = 0;
  std::vector<std::string> active;
  std::vector<std::string> withheld;
  std::string config_hash;
  std::uint64_t seed = 0;

  FilterTrajectory filter;
  std::vector<double> erms;      ///< per step, empty without truth [K]
  std::vector<double> truth_soc; ///< per step, empty without truth
  std::vector<ChannelError> channels;

  double erms_steady_max = 0;  ///< after the transient [K]
  double erms_steady_mean = 0; ///< after the transient [K]
  double soc_error_max = 0;    ///< whole run
  double soc_error_steady_max = 0;
  double trace_p_max = 0;
  double runtime_s = 0;

  const ChannelError &channel(const std::string &sensor) const;
  /// t_s, erms_K, soc_est, soc_truth, trace_P_K2.
  TimeSeries summary_series() const;
};

/// Runs the estimator configured by `cfg` against a prepared scenario.
RunResult run_estimator(const ExperimentConfig &cfg, const Scenario &scenario);

RunResult run_case_study(const ExperimentConfig &cfg);

/// Every rate against every withheld set, one shared scenario, runs in
/// parallel. Results follow the order rate-major.
std::vector<RunResult>
sweep(const ExperimentConfig &cfg, const std::vector<double> &rates,
      const std::vector<std::vector<std::string>> &withheld_sets);

/// Writes trajectory.csv, summary.csv and manifest.json into `dir`.
void write_run(const RunResult &run, const std::string &dir);

/// Scalar metrics and the per-channel error table of one run.
nlohmann::json run_metrics(const RunResult &run);
/// Config hash, seed, versions and run_metrics(); no timestamps.
nlohmann::json manifest_json(const RunResult &run);

/// metrics.json from run_metrics() entries, sorted by rate, fastest first.
/// Carries the published reference figures, marked as not reproducible.
nlohmann::json metrics_json(std::vector<nlohmann::json> runs);
/// Gathers the metrics of every <dir>/*/manifest.json.
std::vector<nlohmann::json> collect_run_metrics(const std::string &dir);
void write_metrics(const nlohmann::json &metrics, const std::string &path);

} // namespace tes

#endif // TES_EXPERIMENT_HPP
