#include "tes/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "tes/errors.hpp"
#include "tes/sdre_filter.hpp"

namespace tes {

void OdeConfig::validate() const {
  if (!(rel_tol > 0) || !(abs_tol > 0) || !(max_dt > 0) ||
      !(min_relative_dt > 0))
    throw InvalidConfig("integrator tolerances and step caps must be > 0");
}

Bs23Integrator::Bs23Integrator(OdeFunction f, OdeConfig cfg)
    : f_(std::move(f)), cfg_(cfg) {
  cfg_.validate();
}

double Bs23Integrator::initial_step(double t0, double t1,
                                    const Eigen::VectorXd &x,
                                    const Eigen::VectorXd &f0) {
  const Eigen::ArrayXd scale = cfg_.abs_tol + cfg_.rel_tol * x.array().abs();
  const double d0 = (x.array() / scale).abs().maxCoeff();
  const double d1 = (f0.array() / scale).abs().maxCoeff();
  const double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  return std::min({h, cfg_.max_dt, t1 - t0});
}

void Bs23Integrator::integrate(double t0, double t1, Eigen::VectorXd &x,
                               std::span<const double> sample_times,
                               const StepObserver &on_sample,
                               const StepObserver &on_step) {
  if (!(t1 >= t0))
    throw InvalidInput("integrate: end time precedes start time");
  std::size_t next = 0;
  while (next < sample_times.size() && sample_times[next] <= t0) {
    if (on_sample)
      on_sample(sample_times[next], x);
    ++next;
  }
  if (t1 == t0)
    return;

  const auto n = x.size();
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), y(n), err(n), tmp(n);
  f_(t0, x, k1);
  ++stats_.rhs_evaluations;
  if (!k1.allFinite())
    throw StiffnessError("integrate: right-hand side is not finite at t = " +
                         std::to_string(t0));

  double t = t0;
  double h = h_ > 0 ? h_ : initial_step(t0, t1, x, k1);
  while (t < t1) {
    const double remaining = t1 - t;
    const bool clipped = h >= remaining;
    const double step = clipped ? remaining : h;
    if (step < cfg_.min_relative_dt * (std::abs(t) + 1.0)) {
      std::ostringstream msg;
      msg << "integrate: step size collapsed to " << step << " s at t = " << t
          << " s; the problem is too stiff for the explicit pair at these "
             "tolerances (use a coarser grid or looser tolerances)";
      throw StiffnessError(msg.str());
    }

    tmp = x + 0.5 * step * k1;
    f_(t + 0.5 * step, tmp, k2);
    tmp = x + 0.75 * step * k2;
    f_(t + 0.75 * step, tmp, k3);
    y = x + step * (2.0 / 9.0 * k1 + 1.0 / 3.0 * k2 + 4.0 / 9.0 * k3);
    f_(t + step, y, k4);
    stats_.rhs_evaluations += 3;
    err = step * (-5.0 / 72.0 * k1 + 1.0 / 12.0 * k2 + 1.0 / 9.0 * k3 -
                  0.125 * k4);

    double ratio = std::numeric_limits<double>::infinity();
    if (y.allFinite() && k4.allFinite()) {
      const Eigen::ArrayXd scale =
          cfg_.abs_tol + cfg_.rel_tol * x.array().abs().max(y.array().abs());
      ratio = (err.array().abs() / scale).maxCoeff();
    }
    if (ratio <= 1.0) {
      const double t_new = clipped ? t1 : t + step;
      // Cubic Hermite interpolation on [t, t_new].
      while (next < sample_times.size() && sample_times[next] <= t_new) {
        const double s = (sample_times[next] - t) / step;
        const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
        const double h10 = s * (1 - s) * (1 - s);
        const double h01 = s * s * (3 - 2 * s);
        const double h11 = s * s * (s - 1);
        tmp = h00 * x + h10 * step * k1 + h01 * y + h11 * step * k4;
        if (on_sample)
          on_sample(sample_times[next], tmp);
        ++next;
      }
      t = t_new;
      x = y;
      k1 = k4;
      ++stats_.accepted;
      stats_.smallest_step = std::min(stats_.smallest_step, step);
      stats_.largest_step = std::max(stats_.largest_step, step);
      if (on_step)
        on_step(t, x);
      const double grow =
          ratio > 0 ? std::min(5.0, 0.9 * std::cbrt(1.0 / ratio)) : 5.0;
      const double proposed = std::min(step * grow, cfg_.max_dt);
      // a step shortened only to land on t1 does not shrink the next one
      h = clipped ? std::max(h, proposed) : proposed;
      h = std::min(h, cfg_.max_dt);
    } else {
      ++stats_.rejected;
      const double shrink =
          std::isfinite(ratio) ? std::max(0.2, 0.9 * std::cbrt(1.0 / ratio))
                               : 0.2;
      h = step * shrink;
    }
  }
  h_ = h;
  while (next < sample_times.size()) {
    if (on_sample)
      on_sample(sample_times[next], x);
    ++next;
  }
}

FiniteVolumeRhs::FiniteVolumeRhs(ThermalModel model)
    : model_(std::move(model)) {
  model_.validate();
  if (model_.cpcm_conductivity.empty()) {
    const StateVector nominal =
        StateVector::Constant(model_.size(), model_.pcm.t_pc);
    edges_ = build_graph(model_, nominal).edges();
  }
}

void FiniteVolumeRhs::operator()(const Eigen::VectorXd &x, double mdot,
                                 double t_in, Eigen::VectorXd &dx) const {
  const GridSpec &grid = model_.grid;
  const int n = grid.size();
  if (x.size() != n)
    throw InvalidInput("rhs: state has wrong length");
  dx.setZero(n);
  double upstream = t_in;
  for (int j = 0; j < grid.nx(); ++j) {
    dx[j] = mdot * model_.fluid.cp * (upstream - x[j]);
    upstream = x[j];
  }
  auto add_flows = [&](const std::vector<ThermalEdge> &edges) {
    for (const auto &e : edges) {
      const double q = (x[e.i] - x[e.j]) * e.conductance();
      dx[e.j] += q;
      dx[e.i] -= q;
    }
  };
  if (edges_.empty() && n > 1)
    add_flows(build_graph(model_, x).edges());
  else
    add_flows(edges_);
  for (int j = 0; j < n; ++j)
    dx[j] /= model_.heat_capacity(j, x[j]);
}

Eigen::VectorXd FiniteVolumeRhs::operator()(const Eigen::VectorXd &x,
                                            double mdot, double t_in) const {
  Eigen::VectorXd dx;
  (*this)(x, mdot, t_in, dx);
  return dx;
}

Eigen::VectorXd rhs(const ThermalModel &model, const StateVector &x,
                    double mdot, double t_in) {
  check_state(x, model.grid);
  return FiniteVolumeRhs(model)(x, mdot, t_in);
}

void integrate_each(const ThermalModel &model, const StateVector &x0,
                    const TimeSeries &inputs, const OdeConfig &cfg, double t0,
                    double t1, double dt_out, const StepObserver &on_sample,
                    const StepObserver &on_step, OdeStats *stats) {
  check_state(x0, model.grid);
  if (!(dt_out > 0) || !(t1 >= t0))
    throw InvalidInput("integrate: need dt_out > 0 and t1 >= t0");
  if (inputs.empty() || inputs.time().front() > t0 + 1e-9)
    throw InvalidInput("integrate: input signals do not cover the start time");
  const std::size_t mdot_col = inputs.channel_index(kMassFlowChannel);
  const std::size_t tin_col = inputs.channel_index(kInletChannel);

  const FiniteVolumeRhs f(model);
  double mdot = 0, t_in = 0;
  Bs23Integrator ode(
      [&](double, const Eigen::VectorXd &x, Eigen::VectorXd &dx) {
        f(x, mdot, t_in, dx);
      },
      cfg);

  const auto count = std::size_t(std::floor((t1 - t0) / dt_out + 1e-9)) + 1;
  std::vector<double> samples(count);
  for (std::size_t k = 0; k < count; ++k)
    samples[k] = t0 + double(k) * dt_out;

  // Segment boundaries: input rows whose values differ from the previous
  // row, inside (t0, t1).
  std::vector<double> breaks{t0};
  std::size_t row = inputs.row_at_or_before(t0, 1e-9);
  for (std::size_t r = row + 1; r < inputs.size(); ++r) {
    const double tr = inputs.time()[r];
    if (tr >= t1)
      break;
    if (inputs.value(r, mdot_col) != inputs.value(r - 1, mdot_col) ||
        inputs.value(r, tin_col) != inputs.value(r - 1, tin_col))
      breaks.push_back(tr);
  }
  breaks.push_back(t1);

  Eigen::VectorXd x = x0;
  std::size_t next = 0;
  const double slack = 1e-9 * dt_out;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s];
    const double b = breaks[s + 1];
    const std::size_t r = inputs.row_at_or_before(a, 1e-9);
    mdot = inputs.value(r, mdot_col);
    t_in = inputs.value(r, tin_col);
    std::size_t last = next;
    while (last < count && samples[last] <= b + slack)
      ++last;
    ode.integrate(a, b, x,
                  std::span<const double>(samples.data() + next, last - next),
                  on_sample, on_step);
    next = last;
  }
  if (stats)
    *stats = ode.stats();
}

StateTrajectory integrate(const ThermalModel &model, const StateVector &x0,
                          const TimeSeries &inputs, const OdeConfig &cfg,
                          double t0, double t1, double dt_out,
                          const StepObserver &on_step, OdeStats *stats) {
  StateTrajectory out;
  integrate_each(
      model, x0, inputs, cfg, t0, t1, dt_out,
      [&](double t, const Eigen::VectorXd &x) {
        out.t.push_back(t);
        out.x.push_back(x);
      },
      on_step, stats);
  return out;
}

GridProjection::GridProjection(const GridSpec &fine, const GridSpec &coarse)
    : coarse_size_(coarse.size()) {
  if (fine.nx() % coarse.nx() != 0 ||
      (fine.ny() - 2) % std::max(coarse.ny() - 2, 1) != 0 ||
      (coarse.ny() == 2) != (fine.ny() == 2))
    throw InvalidConfig("projection: fine grid " + std::to_string(fine.nx()) +
                        "x" + std::to_string(fine.ny()) +
                        " does not partition coarse grid " +
                        std::to_string(coarse.nx()) + "x" +
                        std::to_string(coarse.ny()));
  const int rx = fine.nx() / coarse.nx();
  const int rz = coarse.ny() > 2 ? (fine.ny() - 2) / (coarse.ny() - 2) : 1;
  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b));
  };
  if (!close(fine.dx() * rx, coarse.dx()) || !close(fine.dz(), coarse.dz()))
    throw InvalidConfig("projection: column widths or depths do not match");
  for (int l = 0; l < coarse.ny(); ++l) {
    double h = 0;
    if (l < 2) {
      h = fine.layer_height(l);
    } else {
      for (int f = 0; f < rz; ++f)
        h += fine.layer_height(2 + (l - 2) * rz + f);
    }
    if (!close(h, coarse.layer_height(l)))
      throw InvalidConfig("projection: layer " + std::to_string(l) +
                          " heights do not match");
  }

  owner_.resize(std::size_t(fine.size()));
  std::vector<double> total(std::size_t(coarse.size()), 0.0);
  for (int j = 0; j < fine.size(); ++j) {
    const int l = fine.layer(j);
    const int cl = l < 2 ? l : 2 + (l - 2) / rz;
    const int c = coarse.index(cl, fine.column(j) / rx);
    owner_[std::size_t(j)] = c;
    total[std::size_t(c)] += fine.mass(j);
  }
  weight_.resize(std::size_t(fine.size()));
  for (int j = 0; j < fine.size(); ++j)
    weight_[std::size_t(j)] =
        fine.mass(j) / total[std::size_t(owner_[std::size_t(j)])];
}

StateVector GridProjection::operator()(const StateVector &x_fine) const {
  if (x_fine.size() != Eigen::Index(owner_.size()))
    throw InvalidInput("projection: fine state has wrong length");
  StateVector out = StateVector::Zero(coarse_size_);
  for (std::size_t j = 0; j < owner_.size(); ++j)
    out[owner_[j]] += weight_[j] * x_fine[Eigen::Index(j)];
  return out;
}

StateVector project_fine_to_coarse(const StateVector &x_fine,
                                   const GridSpec &fine,
                                   const GridSpec &coarse) {
  return GridProjection(fine, coarse)(x_fine);
}

MeasurementSpec default_measurement_spec(const GridSpec &coarse,
                                         double variance, double sample_rate,
                                         std::uint64_t seed) {
  const auto sensors = default_sensors(coarse);
  const double sd = std::sqrt(variance);
  MeasurementSpec spec;
  spec.sample_rate = sample_rate;
  spec.seed = seed;
  for (const auto &s : sensors) {
    if (s.averaged_pair) {
      spec.channels.push_back({s.name + "a_K", s.cell, sd});
      spec.channels.push_back({s.name + "b_K", s.cell, sd});
    } else {
      spec.channels.push_back({s.name + "_K", s.cell, sd});
    }
  }
  return spec;
}

TimeSeries synthesize_measurements(const StateTrajectory &coarse,
                                   const MeasurementSpec &spec) {
  if (!(spec.sample_rate > 0))
    throw InvalidConfig("measurement sample rate must be positive");
  std::vector<std::string> names;
  for (const auto &ch : spec.channels) {
    if (!(ch.stddev >= 0))
      throw InvalidConfig("measurement std must be non-negative");
    names.push_back(ch.name);
  }
  TimeSeries out(names);
  if (coarse.size() == 0)
    return out;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double interval = 1.0 / spec.sample_rate;
  const double spacing =
      coarse.size() > 1 ? coarse.t[1] - coarse.t[0] : interval;
  const double tol = 0.5 * std::min(spacing, interval);
  const double t0 = coarse.t.front();
  std::vector<double> row(names.size());
  std::size_t r = 0;
  for (long m = 0;; ++m) {
    const double tm = t0 + double(m) * interval;
    if (tm > coarse.t.back() + tol)
      break;
    while (r + 1 < coarse.size() && coarse.t[r + 1] <= tm + tol)
      ++r;
    if (std::abs(coarse.t[r] - tm) > tol)
      throw InvalidInput("synthesize_measurements: trajectory has no state "
                         "near t = " + std::to_string(tm));
    const StateVector &x = coarse.x[r];
    for (std::size_t c = 0; c < spec.channels.size(); ++c) {
      const auto &ch = spec.channels[c];
      if (ch.cell < 0 || ch.cell >= x.size())
        throw InvalidConfig("measurement channel '" + ch.name +
                            "' maps outside the grid");
      row[c] = x[ch.cell] + ch.stddev * unit(rng);
    }
    out.append(coarse.t[r], row);
  }
  return out;
}

std::vector<double> rmse_over_cells(const std::vector<StateVector> &estimate,
                                    const std::vector<StateVector> &truth) {
  if (estimate.size() != truth.size())
    throw InvalidInput("rmse_over_cells: trajectories have different lengths");
  std::vector<double> out(estimate.size());
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    if (estimate[k].size() != truth[k].size() || estimate[k].size() == 0)
      throw InvalidInput("rmse_over_cells: state sizes differ at step " +
                         std::to_string(k));
    out[k] = std::sqrt((estimate[k] - truth[k]).squaredNorm() /
                       double(estimate[k].size()));
  }
  return out;
}

double rmse_over_time(std::span<const double> estimate,
                      std::span<const double> reference) {
  if (estimate.size() != reference.size() || estimate.empty())
    throw InvalidInput("rmse_over_time: series lengths differ or are empty");
  double sum = 0;
  for (std::size_t k = 0; k < estimate.size(); ++k)
    sum += (estimate[k] - reference[k]) * (estimate[k] - reference[k]);
  return std::sqrt(sum / double(estimate.size()));
}

} // namespace tes
