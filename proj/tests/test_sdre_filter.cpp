#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "tes/experiment.hpp"
#include "tes/sdre_filter.hpp"
#include "test_support.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using tes::testing::Gen;

namespace {

tes::FilterState state(const VectorXd &x, const MatrixXd &p) {
  tes::FilterState fs;
  fs.x_hat = x;
  fs.P = p;
  return fs;
}

tes::LpvSystem full_system() {
  const auto m = tes::testing::estimator_model();
  return {m, tes::sensor_map(tes::default_sensors(m.grid), m.size())};
}

tes::SocParams soc_of(const tes::ThermalModel &m) {
  return tes::make_soc_params(m.grid, m.pcm, 278, 308);
}

/// Smooth synthetic drive: flow steps and an inlet ramp through the latent
/// band.
tes::TimeSeries drive(double duration) {
  tes::ProfileSpec p;
  p.mdot_steps = {{0, 0.12}, {duration * 0.4, 0.0}, {duration * 0.6, 0.18}};
  p.tin_knots = {{0, 282}, {duration * 0.3, 298}, {duration, 286}};
  return tes::make_input_profile(p, duration, 80);
}

/// Noise-free measurements of a trajectory, decimated by `every`.
tes::TimeSeries exact_measurements(const tes::StateTrajectory &truth,
                                   const MatrixXd &c, int every) {
  std::vector<std::string> names;
  for (int r = 0; r < c.rows(); ++r)
    names.push_back("y" + std::to_string(r));
  tes::TimeSeries y(names);
  for (std::size_t k = 0; k < truth.size(); k += std::size_t(every)) {
    const VectorXd v = c * truth.x[k];
    y.append(truth.t[k], std::vector<double>(v.data(), v.data() + v.size()));
  }
  return y;
}

} // namespace

TEST(Predict, UniformStateIsEquilibrium) {
  const auto sys = full_system();
  Gen gen(1);
  const MatrixXd p0 = gen.spd(21);
  const auto fs = state(VectorXd::Constant(21, 291.0), p0);
  tes::NoiseModel noise{MatrixXd::Zero(21, 21), MatrixXd::Identity(4, 4)};
  const auto out = tes::predict(fs, sys, 0.0, 291.0, noise, 0.0125);
  EXPECT_LE((out.x_hat - fs.x_hat).cwiseAbs().maxCoeff(), 1e-12);
  const MatrixXd phi = (sys.at(fs.x_hat, 291.0).A * 0.0125).exp();
  const MatrixXd expect = phi * p0 * phi.transpose();
  EXPECT_LE((out.P - expect).norm(), 1e-10 * expect.norm());
  EXPECT_EQ(out.k, 1);
  EXPECT_DOUBLE_EQ(out.t, 0.0125);
}

TEST(Predict, ShortStepLimit) {
  const auto sys = full_system();
  Gen gen(2);
  const MatrixXd p0 = gen.spd(21);
  const auto fs = state(gen.temperatures(21, 285, 295), p0);
  const auto noise = tes::NoiseModel::standard(21, tes::default_sensors(sys.model.grid));
  const auto out = tes::predict(fs, sys, 0.1, 285, noise, 1e-10);
  EXPECT_LE((out.x_hat - fs.x_hat).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((out.P - (p0 + noise.W)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Predict, ScalarSanity) {
  const auto step = tes::discretize(MatrixXd::Constant(1, 1, -1.0),
                                    VectorXd::Zero(1), std::log(2.0));
  const auto out = tes::predict(state(VectorXd::Ones(1), MatrixXd::Ones(1, 1)),
                                step, 0.0, MatrixXd::Zero(1, 1));
  EXPECT_NEAR(out.P(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(out.x_hat[0], 0.5, 1e-15);
}

TEST(Predict, NonFiniteEstimateDiverges) {
  const auto sys = full_system();
  VectorXd x = VectorXd::Constant(21, 290);
  x[3] = std::numeric_limits<double>::quiet_NaN();
  const auto noise = tes::NoiseModel::standard(21, tes::default_sensors(sys.model.grid));
  EXPECT_THROW(tes::predict(state(x, MatrixXd::Identity(21, 21)), sys, 0, 290,
                            noise, 0.0125),
               tes::FilterDivergence);
}

TEST(KalmanGain, ScalarAndLimits) {
  const MatrixXd one = MatrixXd::Ones(1, 1);
  EXPECT_DOUBLE_EQ(tes::kalman_gain(one, one, one)(0, 0), 0.5);
  Gen gen(3);
  const MatrixXd p = gen.spd(6);
  MatrixXd c = MatrixXd::Zero(2, 6);
  c(0, 1) = c(1, 4) = 1;
  EXPECT_LT(tes::kalman_gain(p, c, 1e12 * MatrixXd::Identity(2, 2)).norm(), 1e-9);
  const MatrixXd id = MatrixXd::Identity(6, 6);
  EXPECT_LE((tes::kalman_gain(p, id, 1e-12 * id) - id).norm(), 1e-8);
}

TEST(KalmanGain, Errors) {
  const MatrixXd p = MatrixXd::Identity(3, 3);
  EXPECT_THROW(tes::kalman_gain(p, MatrixXd::Ones(1, 2), MatrixXd::Ones(1, 1)),
               tes::InvalidInput);
  EXPECT_THROW(tes::kalman_gain(MatrixXd::Zero(3, 3), MatrixXd::Ones(1, 3),
                                -MatrixXd::Ones(1, 1)),
               tes::NumericalError);
}

TEST(Update, ZeroInnovationKeepsEstimate) {
  Gen gen(4);
  const auto sys = full_system();
  const VectorXd x = gen.temperatures(21, 280, 300);
  const auto r = tes::update(state(x, gen.spd(21)), sys.C * x, sys.C,
                             0.007 * MatrixXd::Identity(4, 4));
  EXPECT_LE((r.state.x_hat - x).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(r.innovation.norm(), 1e-12);
}

TEST(Update, PerfectFullMeasurement) {
  Gen gen(5);
  const MatrixXd id = MatrixXd::Identity(5, 5);
  const VectorXd x = gen.temperatures(5, 280, 300);
  const VectorXd y = gen.temperatures(5, 280, 300);
  const auto r = tes::update(state(x, gen.spd(5)), y, id, 1e-12 * id);
  EXPECT_LE((r.state.x_hat - y).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Update, RandomizedTraceAndJosephForm) {
  Gen gen(6);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = gen.integer(1, 12), p = gen.integer(1, n);
    const MatrixXd P = gen.spd(n);
    MatrixXd c(p, n);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < n; ++j)
        c(i, j) = gen.normal();
    const MatrixXd v = gen.spd(p, 0.1);
    const auto r = tes::update(state(VectorXd::Zero(n), P),
                               VectorXd::Zero(p), c, v);
    EXPECT_LE(r.state.P.trace(), P.trace() * (1 + 1e-12));
    const MatrixXd i_kc = MatrixXd::Identity(n, n) - r.gain * c;
    const MatrixXd joseph =
        i_kc * P * i_kc.transpose() + r.gain * v * r.gain.transpose();
    EXPECT_LE((r.state.P - joseph).norm(), 1e-8 * joseph.norm());
    EXPECT_EQ((r.state.P - r.state.P.transpose()).norm(), 0.0);
  }
}

TEST(Update, Errors) {
  const auto sys = full_system();
  const auto fs = state(VectorXd::Constant(21, 290), MatrixXd::Identity(21, 21));
  const MatrixXd v = MatrixXd::Identity(4, 4);
  EXPECT_THROW(tes::update(fs, VectorXd::Zero(3), sys.C, v), tes::InvalidInput);
  VectorXd y = VectorXd::Zero(4);
  y[2] = NAN;
  EXPECT_THROW(tes::update(fs, y, sys.C, v), tes::InvalidInput);
}

TEST(ConditionCovariance, RestoresPositiveDefiniteness) {
  MatrixXd p(2, 2);
  p << 1, 1, 1, 1; // singular
  const int jitter = tes::condition_covariance(p);
  EXPECT_GE(jitter, 1);
  EXPECT_EQ(p.llt().info(), Eigen::Success);
  MatrixXd q(2, 2);
  q << 2, 0.5 + 1e-9, 0.5, 2;
  EXPECT_EQ(tes::condition_covariance(q), 0);
  EXPECT_EQ(q(0, 1), q(1, 0));
}

TEST(SampleSchedule, FromRate) {
  EXPECT_EQ(tes::SampleSchedule::from_rate(80).update_every, 1);
  EXPECT_EQ(tes::SampleSchedule::from_rate(10).update_every, 8);
  EXPECT_EQ(tes::SampleSchedule::from_rate(1).update_every, 80);
  EXPECT_EQ(tes::SampleSchedule::from_rate(0.2).update_every, 400);
  EXPECT_DOUBLE_EQ(tes::SampleSchedule::from_rate(0.2).sample_interval(), 5.0);
  EXPECT_THROW(tes::SampleSchedule::from_rate(3), tes::InvalidConfig);
  EXPECT_THROW((tes::SampleSchedule{0.0125, 0}.validate()), tes::InvalidConfig);
}

TEST(NoiseModel, Standard) {
  const auto m = tes::testing::estimator_model();
  const auto noise = tes::NoiseModel::standard(21, tes::default_sensors(m.grid));
  EXPECT_EQ(noise.W, 1e-7 * MatrixXd::Identity(21, 21));
  EXPECT_DOUBLE_EQ(noise.V(1, 1), 0.0035);
  EXPECT_NO_THROW(noise.validate());
  tes::NoiseModel bad = noise;
  bad.V(0, 0) = -1;
  EXPECT_THROW(bad.validate(), tes::InvalidConfig);
}

TEST(RunFilter, ExactModelFixedPoint) {
  const auto sys = full_system();
  const auto inputs = drive(60);
  const VectorXd x0 = VectorXd::Constant(21, 282);
  const auto truth = tes::propagate_frozen(sys.model, x0, inputs, 0.0125, 60);
  const auto y = exact_measurements(truth, sys.C, 8);
  const auto noise = tes::NoiseModel::standard(21, tes::default_sensors(sys.model.grid));
  const auto tr = tes::run_filter(state(x0, MatrixXd::Identity(21, 21)), sys,
                                  {0.0125, 8}, inputs, y, noise,
                                  soc_of(sys.model));
  ASSERT_EQ(tr.size(), truth.size());
  for (std::size_t k = 0; k < tr.size(); ++k)
    ASSERT_EQ((tr.x_hat[k] - truth.x[k]).cwiseAbs().maxCoeff(), 0.0) << k;
  EXPECT_EQ(tr.updates, int(y.size()));
}

TEST(RunFilter, UpdateRatesStayBelowPredictionOnlyCovariance) {
  const auto sys = full_system();
  const auto inputs = drive(40);
  const VectorXd x0 = VectorXd::Constant(21, 282);
  const auto truth = tes::propagate_frozen(sys.model, x0, inputs, 0.0125, 40);
  const auto noise = tes::NoiseModel::standard(21, tes::default_sensors(sys.model.grid));
  const auto init = state(VectorXd::Constant(21, 285), MatrixXd::Identity(21, 21));
  tes::FilterRunOptions opts;
  opts.missing = tes::MissingMeasurement::Skip;
  opts.end_time = 40;
  const auto open_loop =
      tes::run_filter(init, sys, {0.0125, 1}, inputs,
                      tes::TimeSeries({"a", "b", "c", "d"}), noise,
                      soc_of(sys.model), opts);
  const double bound =
      *std::max_element(open_loop.trace_p.begin(), open_loop.trace_p.end());
  for (int every : {1, 8}) {
    const auto tr = tes::run_filter(init, sys, {0.0125, every}, inputs,
                                    exact_measurements(truth, sys.C, every),
                                    noise, soc_of(sys.model));
    for (std::size_t k = 0; k < tr.size(); ++k) {
      ASSERT_TRUE(tr.x_hat[k].allFinite());
      ASSERT_LE(tr.trace_p[k], bound);
    }
  }
}

TEST(RunFilter, OffsetConvergesOnExactModel) {
  const auto sys = full_system();
  const double duration = 400;
  const auto inputs = drive(duration);
  const VectorXd x0 = VectorXd::Constant(21, 282);
  const auto truth = tes::propagate_frozen(sys.model, x0, inputs, 0.0125, duration);
  auto y = exact_measurements(truth, sys.C, 8);
  tes::TimeSeries noisy(y.channels());
  std::mt19937_64 rng(9);
  std::normal_distribution<double> unit;
  const Eigen::VectorXd sd = tes::measurement_noise(
      tes::default_sensors(sys.model.grid), 0.007).diagonal().cwiseSqrt();
  for (std::size_t r = 0; r < y.size(); ++r) {
    std::vector<double> row(4);
    for (int c = 0; c < 4; ++c)
      row[c] = y.value(r, c) + sd[c] * unit(rng);
    noisy.append(y.time()[r], row);
  }
  const auto noise = tes::NoiseModel::standard(21, tes::default_sensors(sys.model.grid));
  const auto tr = tes::run_filter(state(x0.array() + 5.0, MatrixXd::Identity(21, 21)),
                                  sys, {0.0125, 8}, inputs, noisy, noise,
                                  soc_of(sys.model));
  double late = 0;
  for (std::size_t k = 0; k < tr.size(); ++k)
    if (tr.t[k] >= 0.5 * duration)
      late = std::max(late, (tr.x_hat[k] - truth.x[k]).cwiseAbs().maxCoeff());
  EXPECT_LT(late, 0.084);
}

TEST(RunFilter, Deterministic) {
  const auto sys = full_system();
  const auto inputs = drive(20);
  const auto truth = tes::propagate_frozen(sys.model, VectorXd::Constant(21, 282),
                                           inputs, 0.0125, 20);
  const auto y = exact_measurements(truth, sys.C, 8);
  const auto noise = tes::NoiseModel::standard(21, tes::default_sensors(sys.model.grid));
  const auto init = state(VectorXd::Constant(21, 284), MatrixXd::Identity(21, 21));
  const auto a = tes::run_filter(init, sys, {0.0125, 8}, inputs, y, noise, soc_of(sys.model));
  const auto b = tes::run_filter(init, sys, {0.0125, 8}, inputs, y, noise, soc_of(sys.model));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    ASSERT_EQ(a.x_hat[k], b.x_hat[k]);
    ASSERT_EQ(a.trace_p[k], b.trace_p[k]);
  }
}

TEST(RunFilter, MissingMeasurementPolicy) {
  const auto sys = full_system();
  const auto inputs = drive(2);
  tes::TimeSeries y({"a", "b", "c", "d"});
  y.append(0.0, std::vector<double>(4, 282.0));
  y.append(1.0, std::vector<double>(4, 282.0));
  const auto noise = tes::NoiseModel::standard(21, tes::default_sensors(sys.model.grid));
  const auto init = state(VectorXd::Constant(21, 282), MatrixXd::Identity(21, 21));
  EXPECT_THROW(tes::run_filter(init, sys, {0.0125, 8}, inputs, y, noise,
                               soc_of(sys.model)),
               tes::InvalidInput);
  tes::FilterRunOptions opts;
  opts.missing = tes::MissingMeasurement::Skip;
  const auto tr = tes::run_filter(init, sys, {0.0125, 8}, inputs, y, noise,
                                  soc_of(sys.model), opts);
  EXPECT_EQ(tr.updates, 2);
  EXPECT_EQ(tr.skipped_updates, 20 - 1);
  EXPECT_TRUE(std::isnan(tr.innovation_norm[1]));
  const auto ts = tr.to_timeseries();
  EXPECT_TRUE(ts.has("xhat_21_K"));
  EXPECT_TRUE(ts.has("trace_P_K2"));
  EXPECT_EQ(ts.size(), tr.size());
}

TEST(RunFilter, ChannelCountMustMatch) {
  const auto sys = full_system();
  const auto noise = tes::NoiseModel::standard(21, tes::default_sensors(sys.model.grid));
  EXPECT_THROW(tes::run_filter(state(VectorXd::Constant(21, 282),
                                     MatrixXd::Identity(21, 21)),
                               sys, {0.0125, 8}, drive(1),
                               tes::TimeSeries({"a"}), noise, soc_of(sys.model)),
               tes::InvalidInput);
}

TEST(Autocorrelation, KnownSequences) {
  std::vector<double> alt;
  for (int i = 0; i < 1000; ++i)
    alt.push_back(i % 2 ? 1.0 : -1.0);
  EXPECT_NEAR(tes::autocorrelation(alt, 1), -1.0, 1e-2);
  EXPECT_NEAR(tes::autocorrelation(alt, 0), 1.0, 1e-12);
  Gen gen(7);
  std::vector<double> white;
  for (int i = 0; i < 20000; ++i)
    white.push_back(gen.normal());
  for (int lag = 1; lag < 5; ++lag)
    EXPECT_LT(std::abs(tes::autocorrelation(white, lag)), 0.05);
}
