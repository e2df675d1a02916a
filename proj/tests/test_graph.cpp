#include <gtest/gtest.h>

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "tes/discretization.hpp"
#include "tes/graph.hpp"
#include "test_support.hpp"

using tes::testing::Gen;

namespace {

/// Face-sharing pairs from coordinates alone, fluid-fluid pairs dropped.
int lattice_edges(int nx, int ny) {
  int count = 0;
  for (int a = 0; a < nx * ny; ++a)
    for (int b = a + 1; b < nx * ny; ++b) {
      const int la = a / nx, ca = a % nx, lb = b / nx, cb = b % nx;
      if (std::abs(la - lb) + std::abs(ca - cb) != 1)
        continue;
      if (la == 0 && lb == 0)
        continue;
      ++count;
    }
  return count;
}

Eigen::MatrixXd brute_gramian(const Eigen::MatrixXd &a, double dt,
                              const Eigen::MatrixXd &c, int q) {
  const Eigen::MatrixXd phi = (a * dt).exp();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  for (int i = 0; i <= q; ++i) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    for (int k = 0; k < i; ++k)
      p = p * phi;
    w += p.transpose() * c.transpose() * c * p;
  }
  return w;
}

} // namespace

TEST(ThermalGraph, EdgeValidation) {
  tes::ThermalGraph g(3);
  g.add_edge({0, 1, 1, 1});
  EXPECT_THROW(g.add_edge({1, 0, 1, 1}), tes::InvalidInput);
  EXPECT_THROW(g.add_edge({1, 1, 1, 1}), tes::InvalidInput);
  EXPECT_THROW(g.add_edge({1, 3, 1, 1}), tes::InvalidInput);
  EXPECT_THROW(g.add_edge({1, 2, 0, 1}), tes::InvalidInput);
  EXPECT_FALSE(g.connected());
  g.add_edge({2, 1, 0.5, 0.25});
  EXPECT_TRUE(g.connected());
  EXPECT_EQ(g.adjacent(1), (std::vector<int>{0, 2}));
  EXPECT_DOUBLE_EQ(g.edges()[1].conductance(), 1 / 0.75);
}

TEST(ThermalGraph, Components) {
  tes::ThermalGraph g(5);
  g.add_edge({0, 1, 1, 1});
  g.add_edge({3, 4, 1, 1});
  EXPECT_EQ(g.components(), (std::vector<int>{0, 0, 1, 2, 2}));
  g.remove_edges_if([](const tes::ThermalEdge &e) { return e.i == 3; });
  EXPECT_EQ(g.components(), (std::vector<int>{0, 0, 1, 2, 3}));
}

TEST(BuildGraph, EdgeCountMatchesLatticeEnumeration) {
  Gen gen(17);
  for (int trial = 0; trial < 40; ++trial) {
    const int nx = gen.integer(1, 6), ny = gen.integer(3, 8);
    const auto m = gen.model(nx, ny);
    const auto x = gen.temperatures(m.size(), 275, 310);
    const auto g = tes::build_graph(m, x);
    EXPECT_EQ(int(g.edges().size()), lattice_edges(nx, ny)) << nx << "x" << ny;
    EXPECT_TRUE(g.connected());
  }
}

TEST(EdgeResistance, FluidPlateFace) {
  const auto m = tes::testing::estimator_model();
  const auto &g = m.grid;
  const double a = g.dx() * g.dz();
  const double fluid_half = tes::edge_resistance(3, 0, g, m.fluid);
  const double plate_half = tes::edge_resistance(0, 3, g, m.fluid);
  EXPECT_DOUBLE_EQ(fluid_half, 1 / (m.fluid.htc * a));
  EXPECT_DOUBLE_EQ(plate_half,
                   g.layer_height(1) / (2 * g.conductivity(3) * a));
  const auto graph = tes::build_graph(m, tes::StateVector::Constant(21, 290));
  for (const auto &e : graph.edges())
    if ((e.i == 0 && e.j == 3) || (e.i == 3 && e.j == 0))
      EXPECT_DOUBLE_EQ(e.resistance(), fluid_half + plate_half);
}

TEST(EdgeResistance, SolidLateralFace) {
  const auto m = tes::testing::estimator_model();
  const auto &g = m.grid;
  const double a = g.layer_height(3) * g.dz();
  EXPECT_DOUBLE_EQ(tes::edge_resistance(9, 10, g, m.fluid),
                   g.dx() / (2 * g.conductivity(10) * a));
}

TEST(EdgeResistance, Errors) {
  const auto m = tes::testing::estimator_model();
  EXPECT_THROW(tes::edge_resistance(0, 1, m.grid, m.fluid), tes::InvalidInput);
  EXPECT_THROW(tes::edge_resistance(0, 7, m.grid, m.fluid), tes::InvalidInput);
}

TEST(EdgeResistance, TabulatedConductivityFollowsState) {
  auto m = tes::testing::estimator_model();
  m.cpcm_conductivity = tes::ConductivityCurve({{280, 2}, {300, 8}});
  tes::StateVector x = tes::StateVector::Constant(21, 280);
  const double cold = tes::edge_resistance(9, 10, m, x);
  x[10] = 300;
  EXPECT_NEAR(tes::edge_resistance(9, 10, m, x), cold / 4, 1e-15);
}

TEST(Laplacian, RandomizedAlgebra) {
  Gen gen(23);
  for (int trial = 0; trial < 50; ++trial) {
    const int nx = gen.integer(1, 6), ny = gen.integer(3, 8);
    const auto m = gen.model(nx, ny);
    const auto x = gen.temperatures(m.size(), 270, 315);
    const auto g = tes::build_graph(m, x);
    const Eigen::MatrixXd l = tes::laplacian(g);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m.size());
    const double scale = l.cwiseAbs().maxCoeff();
    EXPECT_EQ((l - l.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE((l * ones).cwiseAbs().maxCoeff(), 1e-10 * scale);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
    EXPECT_GE(es.eigenvalues()[0], -1e-10 * scale);

    const auto lin = tes::assemble(m, x, 290);
    const double ascale = lin.A.cwiseAbs().maxCoeff();
    EXPECT_LE((lin.A * ones).cwiseAbs().maxCoeff(), 1e-10 * ascale);
    for (int i = 0; i < m.size(); ++i)
      for (int j = 0; j < m.size(); ++j)
        if (i != j)
          EXPECT_GE(lin.A(i, j), 0.0);
  }
}

TEST(SystemMatrix, EqualsScaledLaplacian) {
  Gen gen(2);
  const auto m = gen.model(3, 7);
  const auto x = gen.temperatures(21, 280, 300);
  const Eigen::VectorXd cap = tes::capacitance(m, x);
  const Eigen::MatrixXd l = tes::laplacian(tes::build_graph(m, x));
  const Eigen::MatrixXd a = tes::assemble(m, x, 290).A;
  for (int i = 0; i < 21; ++i)
    for (int j = 0; j < 21; ++j)
      EXPECT_NEAR(a(i, j), -l(i, j) / cap[i], 1e-14 * std::abs(l(i, j) / cap[i]));
  Eigen::VectorXd bad = cap;
  bad[4] = 0;
  EXPECT_THROW(tes::system_matrix(tes::build_graph(m, x), bad),
               tes::NumericalError);
}

TEST(InputMatrix, AdvectionColumn) {
  const auto m = tes::testing::estimator_model();
  tes::StateVector x = tes::StateVector::Constant(21, 295);
  x[0] = 290;
  x[1] = 293;
  x[2] = 294;
  const Eigen::VectorXd cap = tes::capacitance(m, x);
  const Eigen::VectorXd b = tes::input_matrix(m, x, 285, cap);
  EXPECT_DOUBLE_EQ(b[0], m.fluid.cp * (285 - 290) / cap[0]);
  EXPECT_DOUBLE_EQ(b[1], m.fluid.cp * (290 - 293) / cap[1]);
  EXPECT_DOUBLE_EQ(b[2], m.fluid.cp * (293 - 294) / cap[2]);
  EXPECT_EQ(b.tail(18).cwiseAbs().maxCoeff(), 0.0);
  const tes::StateVector u = tes::StateVector::Constant(21, 300);
  EXPECT_EQ(tes::input_matrix(m, u, 300, tes::capacitance(m, u)).norm(), 0.0);
}

TEST(Sensors, DefaultMapAndWithholding) {
  const auto m = tes::testing::estimator_model();
  const auto s = tes::default_sensors(m.grid);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0].cell, 2);
  EXPECT_EQ(s[1].cell, 6);
  EXPECT_EQ(s[2].cell, 7);
  EXPECT_EQ(s[3].cell, 8);
  const Eigen::MatrixXd c = tes::sensor_map(s, 21);
  EXPECT_EQ(c.rows(), 4);
  for (int r = 0; r < 4; ++r)
    EXPECT_EQ(c.row(r).sum(), 1.0);
  const auto w = tes::withhold(s, {"TC1"});
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[0].name, "tc2");
  EXPECT_EQ(w[2].name, "tc4");
  EXPECT_THROW(tes::sensor_map({{"x", 21, false}}, 21), tes::InvalidConfig);
}

TEST(Sensors, MeasurementNoise) {
  const auto m = tes::testing::estimator_model();
  const Eigen::MatrixXd v =
      tes::measurement_noise(tes::default_sensors(m.grid), 0.007);
  EXPECT_DOUBLE_EQ(v(0, 0), 0.007);
  EXPECT_DOUBLE_EQ(v(1, 1), 0.0035);
  EXPECT_DOUBLE_EQ(v(2, 2), 0.007);
  EXPECT_DOUBLE_EQ(v(3, 3), 0.0035);
  EXPECT_EQ(v(0, 1), 0.0);
}

TEST(Gramian, ScalarIdentity) {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  EXPECT_DOUBLE_EQ(tes::observability_gramian(one, one, 2)(0, 0), 3.0);
}

TEST(Gramian, MatchesBruteForce) {
  Gen gen(8);
  const auto m = tes::testing::estimator_model();
  const auto x = gen.temperatures(21, 280, 300);
  const Eigen::MatrixXd a = tes::assemble(m, x, 290).A;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, 21);
  c(0, 7) = 1;
  const Eigen::MatrixXd ref = brute_gramian(a, 0.5, c, 21);
  const Eigen::MatrixXd w =
      tes::observability_gramian(tes::matrix_exponential(a, 0.5), c, 21);
  EXPECT_LE((w - ref).cwiseAbs().maxCoeff(), 1e-10 * ref.cwiseAbs().maxCoeff());
}

TEST(Detectability, SingleSensorOnConnectedGrid) {
  const auto m = tes::testing::estimator_model();
  const std::vector<tes::StateVector> samples{
      tes::StateVector::Constant(21, 278), tes::StateVector::Constant(21, 289.5),
      tes::StateVector::Constant(21, 308)};
  for (int cell = 0; cell < 21; ++cell) {
    const tes::LpvSystem sys{m, tes::sensor_map({{"s", cell, false}}, 21)};
    const auto rep = tes::check_detectability(sys, samples, 1.0, 21);
    EXPECT_TRUE(rep.detectable) << cell;
    EXPECT_TRUE(rep.connected);
    EXPECT_TRUE(rep.c_rowsum_ok);
    // One thermocouple cannot resolve 20 diffusion modes: the off-consensus
    // bound is at round-off level, the consensus form is not.
    EXPECT_LT(std::abs(rep.gramian_min_eig_offspan), 1e-12) << cell;
    EXPECT_GT(rep.consensus_form, 0.1);
    EXPECT_LT(rep.offspan_contraction, 1.0);
    EXPECT_EQ(rep.samples, 3);
    EXPECT_EQ(rep.null_direction.size(), 0);
  }
}

TEST(Detectability, BruteForceFormOnTc3) {
  const auto m = tes::testing::estimator_model();
  const tes::StateVector x = tes::StateVector::Constant(21, 289.5);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, 21);
  c(0, 7) = 1;
  const Eigen::MatrixXd a = tes::assemble(m, x, 289.5).A;
  const Eigen::MatrixXd w = brute_gramian(a, 1.0, c, 21);
  // Second smallest eigenvalue of the projected gramian (I - J/n) W (I - J/n);
  // the smallest is the zero along the ones vector.
  const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(21, 21) -
                               Eigen::MatrixXd::Constant(21, 21, 1.0 / 21);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(proj * w * proj);
  const double oracle = es.eigenvalues()[1];
  const auto rep = tes::check_detectability({m, c}, {x}, 1.0, 21);
  EXPECT_NEAR(rep.gramian_min_eig_offspan, oracle, 1e-12);
  // Lower bound over random unit vectors orthogonal to the ones vector.
  tes::testing::Gen gen(33);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd v(21);
    for (int j = 0; j < 21; ++j)
      v[j] = gen.normal();
    v = (proj * v).normalized();
    EXPECT_GE(v.dot(w * v), rep.gramian_min_eig_offspan - 1e-12);
  }
  // Mirror symmetry: a middle-column sensor never sees left-right
  // antisymmetric fields.
  Eigen::VectorXd odd = Eigen::VectorXd::Zero(21);
  for (int layer = 0; layer < 7; ++layer) {
    odd[m.grid.index(layer, 0)] = layer + 1.0;
    odd[m.grid.index(layer, 2)] = -(layer + 1.0);
  }
  odd.normalize();
  EXPECT_LT(odd.dot(w * odd), 1e-20);
  EXPECT_TRUE(rep.detectable);
}

TEST(Detectability, DisconnectedUnmeasuredComponent) {
  const auto m = tes::testing::estimator_model();
  const tes::StateVector x = tes::StateVector::Constant(21, 300);
  auto g = tes::build_graph(m, x);
  // Cut column 2 away from columns 0 and 1.
  g.remove_edges_if([&](const tes::ThermalEdge &e) {
    return (m.grid.column(e.i) == 2) != (m.grid.column(e.j) == 2);
  });
  ASSERT_FALSE(g.connected());
  const Eigen::MatrixXd a = tes::system_matrix(g, tes::capacitance(m, x));
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, 21);
  c(0, 6) = 1; // column 0

  const auto rep = tes::detectability_evidence(g, {a}, c, 1.0, 21);
  EXPECT_FALSE(rep.connected);
  EXPECT_FALSE(rep.detectable);

  Eigen::VectorXd zeta = Eigen::VectorXd::Zero(21);
  for (int j = 0; j < 21; ++j)
    if (m.grid.column(j) == 2)
      zeta[j] = 1;
  zeta.normalize();
  const Eigen::MatrixXd w = brute_gramian(a, 1.0, c, 21);
  EXPECT_LT(zeta.dot(w * zeta), 1e-12);
  EXPECT_LT(rep.gramian_min_eigenvalue, 1e-12);
  ASSERT_EQ(rep.null_direction.size(), 21);
  EXPECT_LE((rep.null_direction - zeta).norm(), 1e-15);
  EXPECT_LT(rep.null_direction.dot(w * rep.null_direction), 1e-12);
  EXPECT_GE(rep.offspan_contraction, 0.99);
}

TEST(Detectability, EmptyOrZeroRowMapIsNotDetectable) {
  const auto m = tes::testing::estimator_model();
  const tes::StateVector x = tes::StateVector::Constant(21, 300);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 21);
  EXPECT_FALSE(tes::check_detectability({m, zero}, {x}, 1.0, 21).detectable);
  EXPECT_THROW(tes::check_detectability({m, zero}, {}, 1.0, 21),
               tes::InvalidInput);
}
