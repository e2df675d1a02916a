#include "tes/graph.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <set>

#include "tes/discretization.hpp"
#include "tes/errors.hpp"

namespace tes {

void ThermalGraph::add_edge(const ThermalEdge &e) {
  if (e.i == e.j || e.i < 0 || e.j < 0 || e.i >= n_ || e.j >= n_)
    throw InvalidInput("graph: invalid edge endpoints");
  if (!(e.r_i > 0) || !(e.r_j > 0) || !std::isfinite(e.r_i) ||
      !std::isfinite(e.r_j))
    throw InvalidInput("graph: resistances must be positive and finite");
  for (const auto &f : edges_)
    if ((f.i == e.i && f.j == e.j) || (f.i == e.j && f.j == e.i))
      throw InvalidInput("graph: duplicate edge");
  edges_.push_back(e);
}

void ThermalGraph::remove_edges_if(
    const std::function<bool(const ThermalEdge &)> &pred) {
  edges_.erase(std::remove_if(edges_.begin(), edges_.end(), pred),
               edges_.end());
}

std::vector<int> ThermalGraph::adjacent(int v) const {
  std::vector<int> out;
  for (const auto &e : edges_) {
    if (e.i == v)
      out.push_back(e.j);
    else if (e.j == v)
      out.push_back(e.i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> ThermalGraph::components() const {
  std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n_));
  for (const auto &e : edges_) {
    nbrs[e.i].push_back(e.j);
    nbrs[e.j].push_back(e.i);
  }
  std::vector<int> label(static_cast<std::size_t>(n_), -1);
  int next = 0;
  std::vector<int> stack;
  for (int s = 0; s < n_; ++s) {
    if (label[s] >= 0)
      continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : nbrs[v])
        if (label[w] < 0) {
          label[w] = next;
          stack.push_back(w);
        }
    }
    ++next;
  }
  return label;
}

bool ThermalGraph::connected() const {
  const auto label = components();
  return std::all_of(label.begin(), label.end(),
                     [](int l) { return l == 0; });
}

namespace {

double half_resistance(int i, int j, const GridSpec &grid,
                       const FluidParams &fluid, double kappa_j) {
  if (!grid.adjacent(i, j))
    throw InvalidInput("edge_resistance: cells " + std::to_string(i) +
                       " and " + std::to_string(j) + " are not adjacent");
  const CellRole ri = grid.role(i);
  const CellRole rj = grid.role(j);
  if (ri == CellRole::Fluid && rj == CellRole::Fluid)
    throw InvalidInput("edge_resistance: fluid cells are not connected");
  const double area = grid.face_area(i, j);
  if (rj == CellRole::Fluid)
    return 1.0 / (fluid.htc * area);
  return grid.extent_towards(j, i) / (2.0 * kappa_j * area);
}

} // namespace

double edge_resistance(int i, int j, const GridSpec &grid,
                       const FluidParams &fluid) {
  const double kappa = (j >= 0 && j < grid.size()) ? grid.conductivity(j) : 1;
  return half_resistance(i, j, grid, fluid, kappa);
}

double edge_resistance(int i, int j, const ThermalModel &model,
                       const StateVector &x) {
  const double kappa = (j >= 0 && j < model.size())
                           ? model.conductivity(j, x[j])
                           : 1.0;
  return half_resistance(i, j, model.grid, model.fluid, kappa);
}

ThermalGraph build_graph(const ThermalModel &model, const StateVector &x) {
  const GridSpec &grid = model.grid;
  check_state(x, grid);
  ThermalGraph g(grid.size());
  auto connect = [&](int i, int j) {
    if (grid.role(i) == CellRole::Fluid && grid.role(j) == CellRole::Fluid)
      return;
    g.add_edge({i, j, edge_resistance(j, i, model, x),
                edge_resistance(i, j, model, x)});
  };
  for (int l = 0; l < grid.ny(); ++l)
    for (int c = 0; c < grid.nx(); ++c) {
      const int j = grid.index(l, c);
      if (c + 1 < grid.nx())
        connect(j, grid.index(l, c + 1));
      if (l + 1 < grid.ny())
        connect(j, grid.index(l + 1, c));
    }
  return g;
}

Eigen::MatrixXd laplacian(const ThermalGraph &g) {
  const int n = g.size();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (const auto &e : g.edges()) {
    const double w = e.conductance();
    l(e.i, e.j) -= w;
    l(e.j, e.i) -= w;
  }
  for (int i = 0; i < n; ++i) {
    l(i, i) = 0.0;
    l(i, i) = -l.row(i).sum();
  }
  return l;
}

Eigen::VectorXd capacitance(const ThermalModel &model, const StateVector &x) {
  check_state(x, model.grid);
  Eigen::VectorXd m(model.size());
  for (int j = 0; j < model.size(); ++j)
    m[j] = model.heat_capacity(j, x[j]);
  return m;
}

Eigen::VectorXd input_matrix(const ThermalModel &model, const StateVector &x,
                             double t_in, const Eigen::VectorXd &cap) {
  const GridSpec &grid = model.grid;
  check_state(x, grid);
  if (cap.size() != grid.size())
    throw InvalidInput("input_matrix: capacitance has wrong length");
  if (!std::isfinite(t_in))
    throw InvalidInput("input_matrix: inlet temperature is not finite");
  Eigen::VectorXd b = Eigen::VectorXd::Zero(grid.size());
  double upstream = t_in;
  for (int j = 0; j < grid.nx(); ++j) {
    b[j] = model.fluid.cp * (upstream - x[j]) / cap[j];
    upstream = x[j];
  }
  return b;
}

Eigen::MatrixXd system_matrix(const ThermalGraph &g,
                              const Eigen::VectorXd &cap) {
  if (cap.size() != g.size())
    throw InvalidInput("system_matrix: capacitance has wrong length");
  if ((cap.array() <= 0.0).any() || !cap.allFinite())
    throw NumericalError("system_matrix: capacitance matrix is singular");
  return -(cap.cwiseInverse().asDiagonal() * laplacian(g));
}

LinearizedDynamics assemble(const ThermalModel &model, const StateVector &x,
                            double t_in) {
  const Eigen::VectorXd cap = capacitance(model, x);
  return {system_matrix(build_graph(model, x), cap),
          input_matrix(model, x, t_in, cap)};
}

std::vector<Sensor> default_sensors(const GridSpec &grid) {
  if (grid.ny() < 3)
    throw InvalidConfig("default_sensors: grid has no CPCM layer");
  const int nx = grid.nx();
  return {{"tc1", grid.index(0, nx - 1), false},
          {"tc2", grid.index(2, 0), true},
          {"tc3", grid.index(2, nx / 2), false},
          {"tc4", grid.index(2, nx - 1), true}};
}

namespace {
std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}
} // namespace

std::vector<Sensor> withhold(const std::vector<Sensor> &sensors,
                             const std::vector<std::string> &withheld) {
  std::set<std::string> drop;
  for (const auto &w : withheld)
    drop.insert(lower(w));
  std::vector<Sensor> out;
  for (const auto &s : sensors)
    if (!drop.count(lower(s.name)))
      out.push_back(s);
  return out;
}

Eigen::MatrixXd sensor_map(const std::vector<Sensor> &sensors, int n) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(Eigen::Index(sensors.size()), n);
  std::set<int> seen;
  for (std::size_t r = 0; r < sensors.size(); ++r) {
    const int cell = sensors[r].cell;
    if (cell < 0 || cell >= n)
      throw InvalidConfig("sensor '" + sensors[r].name + "' maps to cell " +
                          std::to_string(cell) + ", outside 0.." +
                          std::to_string(n - 1));
    if (!seen.insert(cell).second)
      std::clog << "warning: sensor '" << sensors[r].name
                << "' duplicates a measured cell\n";
    c(Eigen::Index(r), cell) = 1.0;
  }
  return c;
}

Eigen::MatrixXd measurement_noise(const std::vector<Sensor> &sensors,
                                  double single_variance) {
  if (!(single_variance > 0))
    throw InvalidConfig("measurement variance must be positive");
  Eigen::VectorXd d(Eigen::Index(sensors.size()));
  for (std::size_t r = 0; r < sensors.size(); ++r)
    d[Eigen::Index(r)] =
        sensors[r].averaged_pair ? single_variance / 2 : single_variance;
  return d.asDiagonal();
}

Eigen::MatrixXd observability_gramian(const Eigen::MatrixXd &phi,
                                      const Eigen::MatrixXd &c, int q) {
  if (phi.rows() != phi.cols() || c.cols() != phi.rows())
    throw InvalidInput("observability_gramian: dimension mismatch");
  if (q < 0)
    throw InvalidInput("observability_gramian: negative horizon");
  const Eigen::MatrixXd ctc = c.transpose() * c;
  Eigen::MatrixXd w = ctc;
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(phi.rows(), phi.cols());
  for (int i = 1; i <= q; ++i) {
    power = phi * power;
    w.noalias() += power.transpose() * ctc * power;
  }
  return 0.5 * (w + w.transpose());
}

DetectabilityReport
detectability_evidence(const ThermalGraph &g,
                       const std::vector<Eigen::MatrixXd> &a_samples,
                       const Eigen::MatrixXd &c, double dt, int q) {
  const int n = g.size();
  if (c.cols() != n)
    throw InvalidInput("detectability: C has wrong column count");
  if (a_samples.empty())
    throw InvalidInput("detectability: no sampled states");

  DetectabilityReport rep;
  rep.connected = g.connected();
  rep.c_rowsum_ok = c.rows() > 0;
  for (Eigen::Index r = 0; r < c.rows(); ++r)
    if (c.row(r).sum() == 0.0)
      rep.c_rowsum_ok = false;
  // Every row of a selection map sums to one; a zero row selects nothing.
  rep.detectable = rep.connected && rep.c_rowsum_ok;

  const std::vector<int> label = g.components();
  const int parts = n ? *std::max_element(label.begin(), label.end()) + 1 : 0;
  std::vector<bool> measured(static_cast<std::size_t>(parts), false);
  for (int j = 0; j < n; ++j)
    if (c.col(j).cwiseAbs().sum() > 0)
      measured[label[j]] = true;
  for (int part = 0; part < parts; ++part) {
    if (measured[part])
      continue;
    rep.null_direction = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j)
      if (label[j] == part)
        rep.null_direction[j] = 1.0;
    rep.null_direction.normalize();
    break;
  }

  // Columns 1.. of the Householder Q of the ones vector span its complement.
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd unit = ones / std::sqrt(double(n));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(ones)};
  const Eigen::MatrixXd q_full = qr.householderQ();
  const Eigen::MatrixXd basis = q_full.rightCols(n - 1);

  rep.gramian_min_eig_offspan = std::numeric_limits<double>::infinity();
  rep.consensus_form = std::numeric_limits<double>::infinity();
  rep.gramian_min_eigenvalue = std::numeric_limits<double>::infinity();
  rep.offspan_contraction = 0;
  for (const auto &a : a_samples) {
    if (a.rows() != n || a.cols() != n)
      throw InvalidInput("detectability: sampled A has wrong size");
    const Eigen::MatrixXd phi = matrix_exponential(a, dt);
    const Eigen::MatrixXd w = observability_gramian(phi, c, q);

    rep.consensus_form = std::min(rep.consensus_form, unit.dot(w * unit));
    if (n > 1) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> projected(
          basis.transpose() * w * basis, Eigen::EigenvaluesOnly);
      rep.gramian_min_eig_offspan = std::min(rep.gramian_min_eig_offspan,
                                             projected.eigenvalues()[0]);
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
    if (es.eigenvalues()[0] < rep.gramian_min_eigenvalue) {
      rep.gramian_min_eigenvalue = es.eigenvalues()[0];
      rep.weakest_direction = es.eigenvectors().col(0);
    }

    if (n > 1) {
      // A is similar to a symmetric matrix, so its spectrum is real; the
      // largest eigenvalue is the consensus zero.
      Eigen::EigenSolver<Eigen::MatrixXd> eig(a, false);
      Eigen::VectorXd re = eig.eigenvalues().real();
      std::sort(re.begin(), re.end(), std::greater<>());
      rep.offspan_contraction = std::max(rep.offspan_contraction,
                                         std::exp(re[1] * dt * q));
    }
    ++rep.samples;
  }
  return rep;
}

DetectabilityReport check_detectability(const LpvSystem &sys,
                                        const std::vector<StateVector> &samples,
                                        double dt, int q) {
  if (samples.empty())
    throw InvalidInput("detectability: no sampled states");
  std::vector<Eigen::MatrixXd> a_samples;
  a_samples.reserve(samples.size());
  for (const auto &x : samples)
    a_samples.push_back(sys.at(x, x[0]).A);
  const ThermalGraph g = build_graph(sys.model, samples.front());
  return detectability_evidence(g, a_samples, sys.C, dt, q);
}

} // namespace tes
