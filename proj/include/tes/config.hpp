#ifndef TES_CONFIG_HPP
#define TES_CONFIG_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tes/grid.hpp"
#include "tes/sdre_filter.hpp"
#include "tes/simulator.hpp"

namespace tes {

enum class RunMode { TwinSim, Replay };

/// Synthetic driving signals: mass flow held piecewise constant from each
/// (t, value) step, inlet temperature linear between (t, value) knots.
struct ProfileSpec {
  std::vector<std::pair<double, double>> mdot_steps; ///< [s], [kg/s]
  std::vector<std::pair<double, double>> tin_knots;  ///< [s], [K]
};

struct ExperimentConfig {
  RunMode mode = RunMode::TwinSim;
  std::string dataset_csv;
  double duration = 1800;      ///< [s]
  std::uint64_t seed = 1;
  double rate = 10;            ///< measurement rate [samples/s]
  double dataset_rate = 80;    ///< rate of the full-resolution dataset
  double dt_predict = 0.0125;  ///< [s]
  std::vector<std::string> sensors{"tc1", "tc2", "tc3", "tc4"};
  std::vector<std::string> withheld;
  double initial_variance = 1.0; ///< P0 = initial_variance I [K^2]
  double initial_offset = 0.0;   ///< added to the default initial estimate [K]
  MissingMeasurement missing = MissingMeasurement::Abort;
  double transient = 60;         ///< excluded from steady-state metrics [s]

  ModuleGeometry geometry;
  FluidParams fluid;
  PcmThermalParams<double> pcm;
  ConductivityCurve cpcm_conductivity;
  int estimator_nx = 3, estimator_ny = 7;
  int truth_nx = 21, truth_ny = 22;
  double t_min = 278, t_max = 308;
  double thermocouple_variance = kThermocoupleVariance;
  double process_variance = kProcessVariance;
  OdeConfig ode;
  ProfileSpec profile;
  /// Sensor name -> (layer, column) on the estimator grid.
  std::map<std::string, std::pair<int, int>> sensor_cells;

  ThermalModel estimator_model() const;
  ThermalModel truth_model() const;
  /// All four thermocouple channels on the estimator grid.
  std::vector<Sensor> all_sensors() const;
  /// Configured sensors minus withheld ones.
  std::vector<Sensor> active_sensors() const;
  SampleSchedule schedule() const;
  int decimation() const;

  void validate() const;
  /// Every semantic field as sorted key = value lines.
  std::string canonical() const;
  /// SHA-256 of canonical(), hex.
  std::string hash() const;
};

/// Illustrative defaults: a 0.15 m module with a water channel, aluminium
/// plate and a finned paraffin composite. Only the phase-change temperature,
/// band width, SOC bounds, noise levels and step sizes are meaningful
/// numbers; the rest is a plausible stand-in.
ExperimentConfig default_config();

/// INI text: [section] key = value. Unknown keys are rejected.
ExperimentConfig parse_config(std::istream &in);
ExperimentConfig load_config(const std::string &path);

/// Writes the effective configuration in the format parse_config reads.
void write_config(std::ostream &out, const ExperimentConfig &cfg);

} // namespace tes

#endif // TES_CONFIG_HPP
