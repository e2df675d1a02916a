#include "tes/sdre_filter.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tes/discretization.hpp"
#include "tes/errors.hpp"

namespace tes {

NoiseModel NoiseModel::standard(int n, const std::vector<Sensor> &sensors,
                                double single_variance,
                                double process_variance) {
  return {process_variance * Eigen::MatrixXd::Identity(n, n),
          measurement_noise(sensors, single_variance)};
}

void NoiseModel::validate() const {
  if (W.rows() != W.cols() || V.rows() != V.cols())
    throw InvalidConfig("noise covariances must be square");
  if (!W.isApprox(W.transpose()) || !V.isApprox(V.transpose()))
    throw InvalidConfig("noise covariances must be symmetric");
  if (V.size() > 0 && V.llt().info() != Eigen::Success)
    throw InvalidConfig("measurement covariance must be positive definite");
}

SampleSchedule SampleSchedule::from_rate(double rate, double dt_predict) {
  if (!(rate > 0) || !(dt_predict > 0))
    throw InvalidConfig("sample rate and prediction step must be positive");
  const double steps = 1.0 / (rate * dt_predict);
  const double rounded = std::round(steps);
  if (rounded < 1 || std::abs(steps - rounded) > 1e-9 * rounded)
    throw InvalidConfig("sample interval " + std::to_string(1.0 / rate) +
                        " s is not a whole number of " +
                        std::to_string(dt_predict) + " s prediction steps");
  return {dt_predict, int(rounded)};
}

void SampleSchedule::validate() const {
  if (!(dt_predict > 0) || update_every < 1)
    throw InvalidConfig("schedule needs dt_predict > 0 and update_every >= 1");
}

int condition_covariance(Eigen::MatrixXd &p) {
  p = 0.5 * (p + p.transpose()).eval();
  double jitter = 1e-12;
  for (int attempt = 0; attempt < 20; ++attempt) {
    if (p.llt().info() == Eigen::Success)
      return attempt;
    p.diagonal().array() += jitter;
    jitter *= 10;
  }
  throw NumericalError("covariance could not be restored to positive "
                       "definiteness");
}

FilterState predict(const FilterState &fs, const DiscreteStep<double> &step,
                    double u, const Eigen::MatrixXd &w) {
  if (!fs.x_hat.allFinite())
    throw FilterDivergence("estimate is not finite at step " +
                           std::to_string(fs.k));
  FilterState out;
  out.x_hat = step.phi * fs.x_hat + step.gamma * u;
  out.P = step.phi * fs.P * step.phi.transpose() + w;
  out.P = 0.5 * (out.P + out.P.transpose()).eval();
  out.k = fs.k + 1;
  out.t = fs.t + step.dt;
  if (!out.x_hat.allFinite() || !out.P.allFinite())
    throw FilterDivergence("prediction produced a non-finite value at step " +
                           std::to_string(out.k));
  return out;
}

FilterState predict(const FilterState &fs, const LpvSystem &sys, double mdot,
                    double t_in, const NoiseModel &noise, double dt) {
  if (!fs.x_hat.allFinite())
    throw FilterDivergence("estimate is not finite at step " +
                           std::to_string(fs.k));
  const LinearizedDynamics lin = sys.at(fs.x_hat, t_in);
  return predict(fs, discretize(lin.A, lin.B, dt), mdot, noise.W);
}

Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd &p_pred,
                            const Eigen::MatrixXd &c,
                            const Eigen::MatrixXd &v) {
  if (c.cols() != p_pred.rows() || v.rows() != c.rows() ||
      v.cols() != c.rows())
    throw InvalidInput("kalman_gain: dimension mismatch");
  const Eigen::MatrixXd s = c * p_pred * c.transpose() + v;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    const double rcond = s.size() ? llt.rcond() : 0.0;
    throw NumericalError("kalman_gain: innovation covariance is not positive "
                         "definite (rcond estimate " +
                         std::to_string(rcond) + ")");
  }
  // S symmetric: K^T = S^-1 C P.
  return llt.solve(c * p_pred).transpose();
}

UpdateResult update(const FilterState &fs, const Eigen::VectorXd &y,
                    const Eigen::MatrixXd &c, const Eigen::MatrixXd &v) {
  const auto n = fs.x_hat.size();
  if (c.cols() != n || y.size() != c.rows())
    throw InvalidInput("update: measurement has " + std::to_string(y.size()) +
                       " entries for a " + std::to_string(c.rows()) + "x" +
                       std::to_string(c.cols()) + " output map");
  if (!y.allFinite())
    throw InvalidInput("update: measurement is not finite");
  UpdateResult r;
  r.gain = kalman_gain(fs.P, c, v);
  r.innovation = y - c * fs.x_hat;
  r.state = fs;
  r.state.x_hat += r.gain * r.innovation;
  r.state.P = (Eigen::MatrixXd::Identity(n, n) - r.gain * c) * fs.P;
  r.jitter = condition_covariance(r.state.P);
  return r;
}

namespace {

void record(FilterTrajectory &tr, const FilterState &fs, const LpvSystem &sys,
            const SocParams &soc, double innovation_norm) {
  tr.t.push_back(fs.t);
  tr.x_hat.push_back(fs.x_hat);
  tr.soc.push_back(
      state_of_charge(fs.x_hat, sys.model.grid, sys.model.pcm, soc));
  tr.trace_p.push_back(fs.P.trace());
  tr.innovation_norm.push_back(innovation_norm);
}

} // namespace

FilterTrajectory run_filter(const FilterState &initial, const LpvSystem &sys,
                            const SampleSchedule &schedule,
                            const TimeSeries &inputs,
                            const TimeSeries &measurements,
                            const NoiseModel &noise, const SocParams &soc,
                            const FilterRunOptions &options) {
  schedule.validate();
  noise.validate();
  const int n = sys.states();
  const int p = sys.outputs();
  if (initial.x_hat.size() != n || initial.P.rows() != n ||
      initial.P.cols() != n)
    throw InvalidInput("run_filter: initial state has wrong dimension");
  if (noise.W.rows() != n || noise.V.rows() != p)
    throw InvalidInput("run_filter: noise model has wrong dimension");
  if (measurements.channel_count() != std::size_t(p))
    throw InvalidInput("run_filter: measurement series has " +
                       std::to_string(measurements.channel_count()) +
                       " channels, output map has " + std::to_string(p) +
                       " rows");
  if (inputs.empty())
    throw InvalidInput("run_filter: no input samples");
  const std::size_t mdot_col = inputs.channel_index(kMassFlowChannel);
  const std::size_t tin_col = inputs.channel_index(kInletChannel);

  const double dt = schedule.dt_predict;
  const double half = dt / 2;
  double end = options.end_time;
  if (end < 0) {
    end = inputs.time().back();
    if (!measurements.empty())
      end = std::max(end, measurements.time().back());
  }
  const long steps = std::max(0L, long(std::floor((end - initial.t) / dt + 0.5)));

  FilterTrajectory tr;
  tr.t.reserve(std::size_t(steps) + 1);
  tr.x_hat.reserve(std::size_t(steps) + 1);

  std::size_t next_meas = 0;
  Eigen::VectorXd y(p);
  auto try_update = [&](FilterState &fs) -> double {
    const double tk = initial.t + double(fs.k) * dt;
    while (next_meas < measurements.size() &&
           measurements.time()[next_meas] < tk - half)
      ++next_meas;
    if (next_meas >= measurements.size() ||
        measurements.time()[next_meas] > tk + half) {
      if (options.missing == MissingMeasurement::Abort)
        throw InvalidInput("run_filter: no measurement within " +
                           std::to_string(half) + " s of t = " +
                           std::to_string(tk));
      ++tr.skipped_updates;
      return std::numeric_limits<double>::quiet_NaN();
    }
    for (int r = 0; r < p; ++r)
      y[r] = measurements.value(next_meas, std::size_t(r));
    ++next_meas;
    UpdateResult u = update(fs, y, sys.C, noise.V);
    fs = std::move(u.state);
    tr.jitter_events += u.jitter;
    ++tr.updates;
    tr.innovations.push_back(u.innovation);
    return u.innovation.norm();
  };

  FilterState fs = initial;
  fs.k = 0;
  double innov = std::numeric_limits<double>::quiet_NaN();
  if (!measurements.empty() &&
      std::abs(measurements.time().front() - initial.t) <= half)
    innov = try_update(fs);
  else
    tr.jitter_events += condition_covariance(fs.P);
  record(tr, fs, sys, soc, innov);
  if (options.observer)
    options.observer(fs);

  for (long k = 0; k < steps; ++k) {
    const double tk = initial.t + double(k) * dt;
    const std::size_t row = inputs.row_at_or_before(tk, half);
    const double mdot = inputs.value(row, mdot_col);
    const double t_in = inputs.value(row, tin_col);
    fs = predict(fs, sys, mdot, t_in, noise, dt);
    fs.t = initial.t + double(fs.k) * dt;
    innov = std::numeric_limits<double>::quiet_NaN();
    if (fs.k % schedule.update_every == 0)
      innov = try_update(fs);
    record(tr, fs, sys, soc, innov);
    if (options.observer)
      options.observer(fs);
  }
  tr.final_state = fs;
  return tr;
}

TimeSeries FilterTrajectory::to_timeseries() const {
  std::vector<std::string> names;
  const auto n = x_hat.empty() ? 0 : x_hat.front().size();
  for (Eigen::Index j = 0; j < n; ++j)
    names.push_back("xhat_" + std::to_string(j + 1) + "_K");
  names.insert(names.end(), {"soc", "trace_P_K2", "innovation_norm_K"});
  TimeSeries ts(names);
  ts.reserve(size());
  std::vector<double> row(names.size());
  for (std::size_t r = 0; r < size(); ++r) {
    for (Eigen::Index j = 0; j < n; ++j)
      row[std::size_t(j)] = x_hat[r][j];
    row[std::size_t(n)] = soc[r];
    row[std::size_t(n) + 1] = trace_p[r];
    row[std::size_t(n) + 2] = innovation_norm[r];
    ts.append(t[r], row);
  }
  return ts;
}

double autocorrelation(const std::vector<double> &v, int lag) {
  const auto n = v.size();
  if (lag < 0 || std::size_t(lag) >= n)
    throw InvalidInput("autocorrelation: lag out of range");
  double mean = 0;
  for (double x : v)
    mean += x;
  mean /= double(n);
  double den = 0, num = 0;
  for (std::size_t i = 0; i < n; ++i)
    den += (v[i] - mean) * (v[i] - mean);
  for (std::size_t i = std::size_t(lag); i < n; ++i)
    num += (v[i] - mean) * (v[i - std::size_t(lag)] - mean);
  return den > 0 ? num / den : 0.0;
}

} // namespace tes
