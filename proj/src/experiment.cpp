#include "tes/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include <Eigen/Core>

#include "tes/discretization.hpp"
#include "tes/errors.hpp"
#include "tes/graph.hpp"
#include "tes/soc.hpp"

#ifndef TES_VERSION
#define TES_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace tes {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string compact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double held_value(const std::vector<std::pair<double, double>> &steps,
                  double t) {
  double v = steps.front().second;
  for (const auto &[ts, value] : steps)
    if (ts <= t)
      v = value;
  return v;
}

double interpolated(const std::vector<std::pair<double, double>> &knots,
                    double t) {
  if (t <= knots.front().first)
    return knots.front().second;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    const auto [t0, v0] = knots[i - 1];
    const auto [t1, v1] = knots[i];
    if (t <= t1)
      return t1 > t0 ? v0 + (v1 - v0) * (t - t0) / (t1 - t0) : v1;
  }
  return knots.back().second;
}

bool contains(const std::vector<Sensor> &sensors, const std::string &name) {
  return std::any_of(sensors.begin(), sensors.end(),
                     [&](const Sensor &s) { return s.name == name; });
}

double max_after(const std::vector<double> &t, const std::vector<double> &v,
                 double from) {
  double worst = 0;
  for (std::size_t r = 0; r < v.size(); ++r)
    if (t[r] >= from)
      worst = std::max(worst, std::abs(v[r]));
  return worst;
}

nlohmann::json json_number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

} // namespace

TimeSeries make_input_profile(const ProfileSpec &profile, double duration,
                              double rate) {
  if (profile.mdot_steps.empty() || profile.tin_knots.empty())
    throw InvalidConfig("input profile needs flow steps and inlet knots");
  if (!(duration > 0) || !(rate > 0))
    throw InvalidConfig("input profile: duration and rate must be positive");
  auto steps = profile.mdot_steps;
  auto knots = profile.tin_knots;
  std::sort(steps.begin(), steps.end());
  std::sort(knots.begin(), knots.end());
  for (const auto &[t, m] : steps)
    if (!(m >= 0))
      throw InvalidConfig("input profile: mass flow must be non-negative");

  TimeSeries out({kMassFlowChannel, kInletChannel});
  const long n = long(std::floor(duration * rate + 0.5));
  out.reserve(std::size_t(n) + 1);
  for (long k = 0; k <= n; ++k) {
    const double t = double(k) / rate;
    const double row[2] = {held_value(steps, t), interpolated(knots, t)};
    out.append(t, row);
  }
  return out;
}

TruthRun simulate_truth(const ExperimentConfig &cfg, const TimeSeries &inputs) {
  const ThermalModel fine = cfg.truth_model();
  const ThermalModel coarse = cfg.estimator_model();
  const GridProjection project(fine.grid, coarse.grid);
  const SocParams soc =
      make_soc_params(fine.grid, fine.pcm, cfg.t_min, cfg.t_max);

  TruthRun run;
  const StateVector x0 = StateVector::Constant(
      fine.size(), inputs.column(kInletChannel).front());
  const double t0 = inputs.time().front();
  const double t1 = inputs.time().back();
  run.coarse.t.reserve(inputs.size());
  run.coarse.x.reserve(inputs.size());
  run.soc.reserve(inputs.size());
  integrate_each(
      fine, x0, inputs, cfg.ode, t0, t1, 1.0 / cfg.dataset_rate,
      [&](double t, const StateVector &x) {
        run.coarse.t.push_back(t);
        run.coarse.x.push_back(project(x));
        run.soc.push_back(state_of_charge(x, fine.grid, fine.pcm, soc));
      },
      {}, &run.stats);
  return run;
}

StateTrajectory propagate_frozen(const ThermalModel &model,
                                 const StateVector &x0,
                                 const TimeSeries &inputs, double dt,
                                 double t_end) {
  if (!(dt > 0))
    throw InvalidInput("propagate_frozen: step must be positive");
  const std::size_t mdot_col = inputs.channel_index(kMassFlowChannel);
  const std::size_t tin_col = inputs.channel_index(kInletChannel);
  const double t0 = inputs.time().front();
  const long steps = long(std::floor((t_end - t0) / dt + 0.5));
  StateTrajectory out;
  out.t.reserve(std::size_t(steps) + 1);
  out.x.reserve(std::size_t(steps) + 1);
  StateVector x = x0;
  out.t.push_back(t0);
  out.x.push_back(x);
  for (long k = 0; k < steps; ++k) {
    const double t = t0 + double(k) * dt;
    const std::size_t row = inputs.row_at_or_before(t, dt / 2);
    const double t_in = inputs.value(row, tin_col);
    const LinearizedDynamics lin = assemble(model, x, t_in);
    const DiscreteStep<double> step = discretize(lin.A, lin.B, dt);
    x = step.phi * x + step.gamma * inputs.value(row, mdot_col);
    out.t.push_back(t0 + double(k + 1) * dt);
    out.x.push_back(x);
  }
  return out;
}

TimeSeries make_dataset(const ExperimentConfig &cfg, const TimeSeries &inputs,
                        const StateTrajectory &coarse) {
  MeasurementSpec spec;
  spec.sample_rate = cfg.dataset_rate;
  spec.seed = cfg.seed;
  const double sd = std::sqrt(cfg.thermocouple_variance);
  for (const auto &s : cfg.all_sensors()) {
    if (s.averaged_pair) {
      spec.channels.push_back({s.name + "a_K", s.cell, sd});
      spec.channels.push_back({s.name + "b_K", s.cell, sd});
    } else {
      spec.channels.push_back({s.name + "_K", s.cell, sd});
    }
  }
  const TimeSeries y = synthesize_measurements(coarse, spec);

  const std::size_t mdot_col = inputs.channel_index(kMassFlowChannel);
  const std::size_t tin_col = inputs.channel_index(kInletChannel);
  const double tol = 0.5 / cfg.dataset_rate;
  TimeSeries out(kDatasetChannels);
  out.reserve(y.size());
  std::vector<double> row(kDatasetChannels.size());
  std::vector<std::size_t> cols;
  for (std::size_t c = 2; c < kDatasetChannels.size(); ++c)
    cols.push_back(y.channel_index(kDatasetChannels[c]));
  for (std::size_t r = 0; r < y.size(); ++r) {
    const std::size_t in = inputs.row_at_or_before(y.time()[r], tol);
    row[0] = inputs.value(in, mdot_col);
    row[1] = inputs.value(in, tin_col);
    for (std::size_t c = 0; c < cols.size(); ++c)
      row[c + 2] = y.value(r, cols[c]);
    out.append(y.time()[r], row);
  }
  return out;
}

TimeSeries with_pair_means(TimeSeries dataset) {
  for (const char *pair : {"tc2", "tc4"}) {
    const std::string name = pair;
    if (dataset.has(name + "_K"))
      continue;
    const auto &a = dataset.column(name + "a_K");
    const auto &b = dataset.column(name + "b_K");
    std::vector<double> mean(a.size());
    for (std::size_t r = 0; r < a.size(); ++r)
      mean[r] = 0.5 * (a[r] + b[r]);
    dataset.add_channel(name + "_K", std::move(mean));
  }
  return dataset;
}

TimeSeries load_dataset(const std::string &path) {
  TimeSeries raw = TimeSeries::load_csv(path, "t_s");
  for (const auto &name : kDatasetChannels)
    if (!raw.has(name))
      throw InvalidInput("dataset '" + path + "': missing column '" + name +
                         "'");
  if (raw.size() < 2)
    throw InvalidInput("dataset '" + path + "': needs at least two rows");
  if (raw.rate_jitter() > 0.01)
    throw InvalidInput("dataset '" + path +
                       "': sample spacing varies by more than 1%");
  for (double m : raw.column("mdot_kg_s"))
    if (m < 0)
      throw InvalidInput("dataset '" + path + "': negative mass flow");
  return with_pair_means(std::move(raw));
}

TimeSeries filter_inputs(const TimeSeries &dataset) {
  const auto &mdot = dataset.column("mdot_kg_s");
  const auto &tin = dataset.column("tc0_K");
  TimeSeries out({kMassFlowChannel, kInletChannel});
  out.reserve(dataset.size());
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const double row[2] = {mdot[r], tin[r]};
    out.append(dataset.time()[r], row);
  }
  return out;
}

TimeSeries filter_measurements(const TimeSeries &dataset,
                               const std::vector<Sensor> &sensors) {
  std::vector<std::string> names;
  for (const auto &s : sensors)
    names.push_back(s.name + "_K");
  return dataset.select(names);
}

Scenario prepare_scenario(const ExperimentConfig &cfg) {
  cfg.validate();
  Scenario sc;
  if (cfg.mode == RunMode::Replay) {
    sc.dataset = load_dataset(cfg.dataset_csv);
    const double spacing = (sc.dataset.time().back() - sc.dataset.time()[0]) /
                           double(sc.dataset.size() - 1);
    if (std::abs(spacing * cfg.dataset_rate - 1) > 0.01)
      throw InvalidConfig("dataset '" + cfg.dataset_csv + "' is sampled at " +
                          compact(1 / spacing) + " S/s, config expects " +
                          compact(cfg.dataset_rate));
    return sc;
  }
  const TimeSeries inputs =
      make_input_profile(cfg.profile, cfg.duration, cfg.dataset_rate);
  sc.truth = simulate_truth(cfg, inputs);
  sc.dataset = with_pair_means(make_dataset(cfg, inputs, sc.truth->coarse));
  return sc;
}

const ChannelError &RunResult::channel(const std::string &sensor) const {
  for (const auto &c : channels)
    if (c.sensor == sensor)
      return c;
  throw InvalidInput("run '" + label + "' has no channel '" + sensor + "'");
}

TimeSeries RunResult::summary_series() const {
  TimeSeries ts({"erms_K", "soc_est", "soc_truth", "trace_P_K2"});
  ts.reserve(filter.size());
  for (std::size_t r = 0; r < filter.size(); ++r) {
    const double row[4] = {erms.empty() ? kNaN : erms[r], filter.soc[r],
                           truth_soc.empty() ? kNaN : truth_soc[r],
                           filter.trace_p[r]};
    ts.append(filter.t[r], row);
  }
  return ts;
}

RunResult run_estimator(const ExperimentConfig &cfg, const Scenario &scenario) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate();
  const std::vector<Sensor> active = cfg.active_sensors();
  if (active.empty())
    throw InvalidConfig("no thermocouple left after withholding; with no "
                        "measured state the estimate cannot be corrected");

  const ThermalModel model = cfg.estimator_model();
  const LpvSystem sys{model, sensor_map(active, model.size())};
  const NoiseModel noise = NoiseModel::standard(
      model.size(), active, cfg.thermocouple_variance, cfg.process_variance);
  const SocParams soc =
      make_soc_params(model.grid, model.pcm, cfg.t_min, cfg.t_max);

  const TimeSeries &full = scenario.dataset;
  const TimeSeries decimated = full.decimate(cfg.decimation());
  const TimeSeries inputs = filter_inputs(decimated);
  const TimeSeries measurements = filter_measurements(decimated, active);

  FilterState initial;
  initial.x_hat = Eigen::VectorXd::Constant(
      model.size(), inputs.column(kInletChannel).front() + cfg.initial_offset);
  initial.P = cfg.initial_variance *
              Eigen::MatrixXd::Identity(model.size(), model.size());
  initial.t = full.time().front();

  FilterRunOptions options;
  options.missing = cfg.missing;
  options.end_time = full.time().back();

  RunResult run;
  run.rate = cfg.rate;
  run.update_every = cfg.schedule().update_every;
  for (const auto &s : active)
    run.active.push_back(s.name);
  run.withheld = cfg.withheld;
  run.label = "rate_" + compact(cfg.rate);
  for (const auto &w : cfg.withheld)
    run.label += "_without_" + w;
  run.config_hash = cfg.hash();
  run.seed = cfg.seed;

  run.filter = run_filter(initial, sys, cfg.schedule(), inputs, measurements,
                          noise, soc, options);
  const FilterTrajectory &f = run.filter;
  if (f.size() != full.size())
    throw InvalidInput("estimator produced " + std::to_string(f.size()) +
                       " steps for " + std::to_string(full.size()) +
                       " dataset rows; the dataset rate must match the "
                       "prediction step");
  for (std::size_t r = 0; r < f.size(); ++r)
    if (std::abs(f.t[r] - full.time()[r]) > cfg.dt_predict / 2)
      throw InvalidInput("dataset row " + std::to_string(r + 1) +
                         " is off the prediction grid");

  const TruthRun *truth = scenario.truth ? &*scenario.truth : nullptr;
  if (truth) {
    if (truth->coarse.size() != f.size())
      throw InvalidInput("truth and estimate have different lengths");
    run.erms = rmse_over_cells(f.x_hat, truth->coarse.x);
    run.truth_soc = truth->soc;
  }

  for (const auto &s : cfg.all_sensors()) {
    ChannelError ch;
    ch.sensor = s.name;
    ch.cell = s.cell;
    ch.withheld = !contains(active, s.name);
    std::vector<double> est(f.size());
    for (std::size_t r = 0; r < f.size(); ++r)
      est[r] = f.x_hat[r][s.cell];
    ch.rmse_vs_measurement = rmse_over_time(est, full.column(s.name + "_K"));
    ch.rmse_vs_truth = kNaN;
    if (truth) {
      std::vector<double> ref(f.size());
      for (std::size_t r = 0; r < f.size(); ++r)
        ref[r] = truth->coarse.x[r][s.cell];
      ch.rmse_vs_truth = rmse_over_time(est, ref);
    }
    run.channels.push_back(ch);
  }

  const double steady_from = f.t.front() + cfg.transient;
  if (truth) {
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < f.size(); ++r) {
      const double soc_err = std::abs(f.soc[r] - run.truth_soc[r]);
      run.soc_error_max = std::max(run.soc_error_max, soc_err);
      if (f.t[r] >= steady_from) {
        run.erms_steady_max = std::max(run.erms_steady_max, run.erms[r]);
        run.soc_error_steady_max = std::max(run.soc_error_steady_max, soc_err);
        sum += run.erms[r];
        ++count;
      }
    }
    run.erms_steady_mean = count ? sum / double(count) : 0.0;
  } else {
    run.erms_steady_max = run.erms_steady_mean = kNaN;
    run.soc_error_max = run.soc_error_steady_max = kNaN;
  }
  run.trace_p_max = max_after(f.t, f.trace_p, f.t.front());
  run.runtime_s = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - started)
                      .count();
  return run;
}

RunResult run_case_study(const ExperimentConfig &cfg) {
  return run_estimator(cfg, prepare_scenario(cfg));
}

std::vector<RunResult>
sweep(const ExperimentConfig &cfg, const std::vector<double> &rates,
      const std::vector<std::vector<std::string>> &withheld_sets) {
  std::vector<ExperimentConfig> jobs;
  for (double rate : rates)
    for (const auto &w : withheld_sets) {
      ExperimentConfig c = cfg;
      c.rate = rate;
      c.withheld = w;
      c.validate();
      jobs.push_back(std::move(c));
    }
  const Scenario scenario = prepare_scenario(cfg);

  std::vector<RunResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = run_estimator(jobs[i], scenario);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(
      jobs.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back(worker);
  pool.clear();
  for (const auto &e : errors)
    if (e)
      std::rethrow_exception(e);
  return results;
}

nlohmann::json run_metrics(const RunResult &run) {
  nlohmann::json channels = nlohmann::json::array();
  for (const auto &c : run.channels)
    channels.push_back({{"sensor", c.sensor},
                        {"cell", c.cell},
                        {"withheld", c.withheld},
                        {"rmse_vs_measurement_K", c.rmse_vs_measurement},
                        {"rmse_vs_truth_K", json_number(c.rmse_vs_truth)}});
  const auto &f = run.filter;
  return {{"label", run.label},
          {"rate_Sps", run.rate},
          {"update_every", run.update_every},
          {"sensors", run.active},
          {"withheld", run.withheld},
          {"steps", f.size()},
          {"updates", f.updates},
          {"skipped_updates", f.skipped_updates},
          {"jitter_events", f.jitter_events},
          {"has_truth", !run.erms.empty()},
          {"erms_steady_max_K", json_number(run.erms_steady_max)},
          {"erms_steady_mean_K", json_number(run.erms_steady_mean)},
          {"soc_error_max", json_number(run.soc_error_max)},
          {"soc_error_steady_max", json_number(run.soc_error_steady_max)},
          {"trace_P_max_K2", run.trace_p_max},
          {"trace_P_final_K2", f.trace_p.empty() ? 0.0 : f.trace_p.back()},
          {"channels", channels}};
}

nlohmann::json manifest_json(const RunResult &run) {
  return {{"config_hash", run.config_hash},
          {"seed", run.seed},
          {"versions",
           {{"tes", TES_VERSION},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                          std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"compiler", __VERSION__}}},
          {"metrics", run_metrics(run)}};
}

nlohmann::json metrics_json(std::vector<nlohmann::json> runs) {
  std::stable_sort(runs.begin(), runs.end(),
                   [](const nlohmann::json &a, const nlohmann::json &b) {
                     return a.at("rate_Sps").get<double>() >
                            b.at("rate_Sps").get<double>();
                   });
  nlohmann::json table = nlohmann::json::array();
  for (const auto &r : runs)
    for (const auto &c : r.at("channels"))
      if (c.at("withheld").get<bool>())
        table.push_back({{"rate_Sps", r.at("rate_Sps")},
                         {"sensor", c.at("sensor")},
                         {"cell", c.at("cell")},
                         {"rmse_vs_measurement_K",
                          c.at("rmse_vs_measurement_K")},
                         {"rmse_vs_truth_K", c.at("rmse_vs_truth_K")}});
  auto rows = [](std::initializer_list<double> values) {
    nlohmann::json out = nlohmann::json::array();
    const double rates[] = {80, 10, 1, 0.2};
    std::size_t i = 0;
    for (double v : values)
      out.push_back({{"rate_Sps", rates[i++]}, {"rmse_K", v}});
    return out;
  };
  return {
      {"schema", "tes-metrics/1"},
      {"runs", runs},
      {"withheld_channel_rmse", table},
      {"published_reference",
       {{"reproducible", false},
        {"note", "Published figures from an unpublished experimental "
                 "dataset, for side-by-side reading only."},
        {"cv1_rmse_tc1_withheld", rows({0.2436, 0.2617, 0.3811, 0.7526})},
        {"cv3_rmse_tc3_withheld", rows({1.0022, 1.1046, 1.2048, 1.3270})},
        {"simulation_soc_error_bound", 0.02}}}};
}

std::vector<nlohmann::json> collect_run_metrics(const std::string &dir) {
  std::vector<fs::path> manifests;
  if (fs::is_directory(dir))
    for (const auto &entry : fs::directory_iterator(dir))
      if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
        manifests.push_back(entry.path() / "manifest.json");
  std::sort(manifests.begin(), manifests.end());
  std::vector<nlohmann::json> out;
  for (const auto &m : manifests) {
    std::ifstream in(m);
    try {
      out.push_back(nlohmann::json::parse(in).at("metrics"));
    } catch (const nlohmann::json::exception &e) {
      throw InvalidInput("unreadable manifest '" + m.string() + "': " +
                         e.what());
    }
  }
  return out;
}

void write_metrics(const nlohmann::json &metrics, const std::string &path) {
  std::ofstream out(path);
  if (!out)
    throw InvalidInput("cannot write '" + path + "'");
  out << metrics.dump(2) << '\n';
}

void write_run(const RunResult &run, const std::string &dir) {
  fs::create_directories(dir);
  run.filter.to_timeseries().save_csv((fs::path(dir) / "trajectory.csv").string());
  run.summary_series().save_csv((fs::path(dir) / "summary.csv").string());
  write_metrics(manifest_json(run), (fs::path(dir) / "manifest.json").string());
}

} // namespace tes
