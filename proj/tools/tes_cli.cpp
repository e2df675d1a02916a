// tes: truth simulation, estimation, sweeps, detectability checks and
// reports for the PCM thermal-storage estimator.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "tes/config.hpp"
#include "tes/errors.hpp"
#include "tes/experiment.hpp"
#include "tes/graph.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "results";
};

void add_common(CLI::App *cmd, Common &c) {
  cmd->add_option("--config", c.config, "INI config file (defaults if absent)");
  cmd->add_option("--seed", c.seed, "RNG seed override");
  cmd->add_option("--out", c.out, "output directory");
}

tes::ExperimentConfig load(const Common &c) {
  tes::ExperimentConfig cfg =
      c.config.empty() ? tes::default_config() : tes::load_config(c.config);
  if (c.seed)
    cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

void save_effective_config(const tes::ExperimentConfig &cfg,
                           const fs::path &dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "config.ini");
  tes::write_config(out, cfg);
}

int cmd_simulate(const Common &c) {
  tes::ExperimentConfig cfg = load(c);
  cfg.mode = tes::RunMode::TwinSim;
  const tes::Scenario sc = tes::prepare_scenario(cfg);
  const fs::path dir = c.out;
  save_effective_config(cfg, dir);
  sc.dataset.select(tes::kDatasetChannels)
      .save_csv((dir / "dataset.csv").string());

  const auto &truth = *sc.truth;
  std::vector<std::string> names;
  const auto n = truth.coarse.x.front().size();
  for (Eigen::Index j = 0; j < n; ++j)
    names.push_back("x_" + std::to_string(j + 1) + "_K");
  names.push_back("soc");
  tes::TimeSeries ts(names);
  ts.reserve(truth.coarse.size());
  std::vector<double> row(names.size());
  for (std::size_t r = 0; r < truth.coarse.size(); ++r) {
    for (Eigen::Index j = 0; j < n; ++j)
      row[std::size_t(j)] = truth.coarse.x[r][j];
    row.back() = truth.soc[r];
    ts.append(truth.coarse.t[r], row);
  }
  ts.save_csv((dir / "truth.csv").string());
  std::cout << "truth: " << truth.stats.accepted << " accepted steps, "
            << truth.stats.rejected << " rejected; wrote " << dir.string()
            << "\n";
  return 0;
}

void print_run(const tes::RunResult &run) {
  std::cout << std::fixed << std::setprecision(4) << run.label << ": "
            << run.filter.updates << " updates";
  if (!run.erms.empty())
    std::cout << ", steady e_rms max " << run.erms_steady_max
              << " K, |SOC error| max " << run.soc_error_max;
  std::cout << ", max trace(P) " << run.trace_p_max << " K^2\n";
  for (const auto &ch : run.channels)
    std::cout << "  " << ch.sensor << (ch.withheld ? " (withheld)" : "")
              << ": rmse vs measurement " << ch.rmse_vs_measurement << " K\n";
}

int cmd_estimate(const Common &c, std::optional<double> rate,
                 const std::vector<std::string> &withheld,
                 const std::string &dataset) {
  tes::ExperimentConfig cfg = load(c);
  if (rate)
    cfg.rate = *rate;
  if (!withheld.empty())
    cfg.withheld = withheld;
  if (!dataset.empty()) {
    cfg.mode = tes::RunMode::Replay;
    cfg.dataset_csv = dataset;
  }
  cfg.validate();
  const tes::RunResult run = tes::run_case_study(cfg);
  const fs::path dir = c.out;
  save_effective_config(cfg, dir);
  tes::write_run(run, dir.string());
  tes::write_metrics(tes::metrics_json({tes::run_metrics(run)}),
                     (dir / "metrics.json").string());
  print_run(run);
  return 0;
}

std::vector<std::vector<std::string>>
parse_sets(const std::vector<std::string> &sets) {
  std::vector<std::vector<std::string>> out;
  for (const auto &s : sets) {
    std::vector<std::string> names;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, '+'))
      if (!item.empty() && item != "none")
        names.push_back(item);
    out.push_back(names);
  }
  return out;
}

int cmd_sweep(const Common &c, const std::vector<double> &rates,
              const std::vector<std::string> &sets) {
  const tes::ExperimentConfig cfg = load(c);
  const auto runs = tes::sweep(cfg, rates, parse_sets(sets));
  const fs::path dir = c.out;
  save_effective_config(cfg, dir);
  std::vector<nlohmann::json> metrics;
  for (const auto &run : runs) {
    tes::write_run(run, (dir / run.label).string());
    metrics.push_back(tes::run_metrics(run));
    print_run(run);
  }
  tes::write_metrics(tes::metrics_json(metrics),
                     (dir / "metrics.json").string());
  return 0;
}

int cmd_detectability(const Common &c, const std::vector<std::string> &withheld,
                      double dt, int horizon) {
  tes::ExperimentConfig cfg = load(c);
  if (!withheld.empty())
    cfg.withheld = withheld;
  cfg.validate();
  const auto sensors = cfg.active_sensors();
  if (sensors.empty()) {
    std::cout << "no sensors left after withholding: not detectable\n";
    return 0;
  }
  const tes::ThermalModel model = cfg.estimator_model();
  const tes::LpvSystem sys{model, tes::sensor_map(sensors, model.size())};
  std::vector<tes::StateVector> samples;
  for (double t : {cfg.t_min, cfg.pcm.t_pc, cfg.t_max})
    samples.push_back(tes::StateVector::Constant(model.size(), t));
  tes::StateVector ramp(model.size());
  for (int j = 0; j < model.size(); ++j)
    ramp[j] = cfg.t_min + (cfg.t_max - cfg.t_min) * j / (model.size() - 1.0);
  samples.push_back(ramp);
  const int q = horizon > 0 ? horizon : model.size();
  const tes::DetectabilityReport rep =
      tes::check_detectability(sys, samples, dt, q);

  std::cout << std::setprecision(6) << "sensors:";
  for (const auto &s : sensors)
    std::cout << ' ' << s.name;
  std::cout << "\ngraph connected: " << (rep.connected ? "yes" : "no")
            << "\nevery C row selects a state: "
            << (rep.c_rowsum_ok ? "yes" : "no")
            << "\ngramian lower bound off the consensus direction: "
            << rep.gramian_min_eig_offspan
            << "\ngramian form along consensus: " << rep.consensus_form
            << "\nsmallest gramian eigenvalue: " << rep.gramian_min_eigenvalue
            << "\noff-consensus contraction over horizon: "
            << rep.offspan_contraction << "\nsampled states: " << rep.samples
            << "\nverdict: " << (rep.detectable ? "detectable" : "NOT detectable")
            << "\n";
  const Eigen::IOFormat row(4, 0, ", ", "", "", "", "[", "]");
  if (rep.null_direction.size())
    std::cout << "unmeasured component (gramian null direction): "
              << rep.null_direction.transpose().format(row) << "\n";
  else if (!rep.detectable)
    std::cout << "weakest gramian direction: "
              << rep.weakest_direction.transpose().format(row) << "\n";
  return 0;
}

int cmd_report(const Common &c) {
  const auto metrics = tes::collect_run_metrics(c.out);
  const fs::path path = fs::path(c.out) / "metrics.json";
  fs::create_directories(c.out);
  tes::write_metrics(tes::metrics_json(metrics), path.string());
  std::cout << "collected " << metrics.size() << " runs into "
            << path.string() << "\n";
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"PCM thermal storage: finite-volume truth, SDRE estimation"};
  app.require_subcommand(1);

  Common sim_c, est_c, sweep_c, det_c, rep_c;
  auto *sim = app.add_subcommand("simulate", "generate a twin-model dataset");
  add_common(sim, sim_c);

  auto *est = app.add_subcommand("estimate", "run the filter once");
  add_common(est, est_c);
  std::optional<double> rate;
  std::vector<std::string> est_withheld, det_withheld;
  std::string dataset;
  est->add_option("--rate", rate, "measurement rate [S/s]")
      ->check(CLI::IsMember({80.0, 10.0, 1.0, 0.2}));
  est->add_option("--withhold", est_withheld, "sensors to withhold")
      ->delimiter(',');
  est->add_option("--dataset", dataset, "replay this dataset CSV");

  auto *sw = app.add_subcommand("sweep", "sample-rate by sensor-set matrix");
  add_common(sw, sweep_c);
  std::vector<double> rates{80, 10, 1, 0.2};
  std::vector<std::string> sets{"tc1", "tc3"};
  sw->add_option("--rates", rates, "measurement rates [S/s]")->delimiter(',');
  sw->add_option("--withhold", sets,
                 "withheld sets, comma separated; join sensors with '+', "
                 "'none' for the full set")
      ->delimiter(',');

  auto *det = app.add_subcommand("check-detectability",
                                 "graph and gramian detectability evidence");
  add_common(det, det_c);
  double dt = 1.0;
  int horizon = 0;
  det->add_option("--withhold", det_withheld, "sensors to withhold")
      ->delimiter(',');
  det->add_option("--dt", dt, "gramian step [s]")->check(CLI::PositiveNumber);
  det->add_option("--horizon", horizon, "gramian horizon, 0 = state count");

  auto *rep = app.add_subcommand("report", "collect run manifests into "
                                           "metrics.json");
  rep->add_option("--out", rep_c.out, "directory holding run folders");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*sim)
      return cmd_simulate(sim_c);
    if (*est)
      return cmd_estimate(est_c, rate, est_withheld, dataset);
    if (*sw)
      return cmd_sweep(sweep_c, rates, sets);
    if (*det)
      return cmd_detectability(det_c, det_withheld, dt, horizon);
    if (*rep)
      return cmd_report(rep_c);
  } catch (const tes::NumericalError &e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const tes::Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
