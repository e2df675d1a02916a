#ifndef TES_GRAPH_HPP
#define TES_GRAPH_HPP

// Thermal resistance network of the finite-volume lattice and the
// state-dependent matrices of  xdot = A(x) x + B(x) mdot,  A = -M^-1 L.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tes/grid.hpp"

namespace tes {

/// Undirected edge between control volumes i and j. Each endpoint owns one
/// of the two series resistances.
struct ThermalEdge {
  int i{};
  int j{};
  double r_i{}; ///< half owned by i [K/W]
  double r_j{}; ///< half owned by j [K/W]

  double resistance() const { return r_i + r_j; }
  double conductance() const { return 1.0 / (r_i + r_j); }
};

class ThermalGraph {
public:
  ThermalGraph() = default;
  explicit ThermalGraph(int n) : n_(n) {}

  int size() const { return n_; }
  const std::vector<ThermalEdge> &edges() const { return edges_; }

  /// Throws InvalidInput for self-loops, out-of-range endpoints, duplicate
  /// edges or non-positive resistances.
  void add_edge(const ThermalEdge &e);

  /// Drops every edge for which `pred` returns true.
  void remove_edges_if(const std::function<bool(const ThermalEdge &)> &pred);

  /// Neighbours of vertex v.
  std::vector<int> adjacent(int v) const;

  /// Component label per vertex (labels 0..k-1 in order of first vertex).
  std::vector<int> components() const;
  bool connected() const;

private:
  int n_ = 0;
  std::vector<ThermalEdge> edges_;
};

/// Half resistance R_{j,i} owned by cell j on the face shared with cell i:
/// 1/(U a) on the fluid side of a fluid-plate face, extent/(2 k_j a) for a
/// solid cell. Throws InvalidInput for non-adjacent cells and fluid-fluid
/// pairs.
double edge_resistance(int i, int j, const GridSpec &grid,
                       const FluidParams &fluid);
/// Same, with the CPCM conductivity evaluated at the state x.
double edge_resistance(int i, int j, const ThermalModel &model,
                       const StateVector &x);

/// Lattice graph of all face-sharing cells except fluid-fluid pairs.
ThermalGraph build_graph(const ThermalModel &model, const StateVector &x);

/// Weighted Laplacian: off-diagonals -1/(R_ij + R_ji), diagonal equal to the
/// negative row sum.
Eigen::MatrixXd laplacian(const ThermalGraph &g);

/// Diagonal heat capacities m_j c_p,j(T_j) [J/K].
Eigen::VectorXd capacitance(const ThermalModel &model, const StateVector &x);

/// Advection column B(x) [K/kg]; rows past the fluid layer are zero.
/// `capacitance` is the diagonal of M(x).
Eigen::VectorXd input_matrix(const ThermalModel &model, const StateVector &x,
                             double t_in,
                             const Eigen::VectorXd &capacitance);

struct LinearizedDynamics {
  Eigen::MatrixXd A; ///< -M^-1 L [1/s]
  Eigen::VectorXd B; ///< [K/kg]
};

/// Evaluates A(x) and B(x) at a state and inlet temperature.
LinearizedDynamics assemble(const ThermalModel &model, const StateVector &x,
                            double t_in);

/// -M^-1 L for a given graph; used directly for graphs with edited topology.
Eigen::MatrixXd system_matrix(const ThermalGraph &g,
                              const Eigen::VectorXd &capacitance);

/// One measurement channel. Averaged pairs (TC2a/b, TC4a/b) are one channel.
struct Sensor {
  std::string name;
  int cell = -1;
  bool averaged_pair = false;
};

/// TC1 at the outlet fluid cell; TC2, TC3, TC4 in the first CPCM layer at
/// the inlet, middle and outlet columns.
std::vector<Sensor> default_sensors(const GridSpec &grid);

/// Keeps the sensors whose names are not listed in `withheld` (case
/// insensitive), preserving order.
std::vector<Sensor> withhold(const std::vector<Sensor> &sensors,
                             const std::vector<std::string> &withheld);

/// Binary p-by-n selection matrix, one row per sensor in order. Throws
/// InvalidConfig for an out-of-range cell. Duplicate cells are reported on
/// std::clog.
Eigen::MatrixXd sensor_map(const std::vector<Sensor> &sensors, int n);

/// Diagonal measurement covariance: `single_variance` for single
/// thermocouples, half of it for averaged pairs.
Eigen::MatrixXd measurement_noise(const std::vector<Sensor> &sensors,
                                  double single_variance);

/// Model plus output map: the object the filter works with.
struct LpvSystem {
  ThermalModel model;
  Eigen::MatrixXd C;

  int states() const { return model.size(); }
  int outputs() const { return static_cast<int>(C.rows()); }
  LinearizedDynamics at(const StateVector &x, double t_in) const {
    return assemble(model, x, t_in);
  }
};

struct DetectabilityReport {
  bool connected = false;
  bool c_rowsum_ok = false;
  /// Smallest quadratic form of the observability gramian over unit vectors
  /// orthogonal to span{1}.
  double gramian_min_eig_offspan = 0;
  /// Quadratic form of the gramian in the consensus direction 1/sqrt(n).
  double consensus_form = 0;
  /// Smallest eigenvalue of the gramian and its eigenvector.
  double gramian_min_eigenvalue = 0;
  Eigen::VectorXd weakest_direction;
  /// Decay of the slowest non-consensus mode over the horizon, e^{lambda_2 q dt}
  /// (< 1: disagreement between cells dies out).
  double offspan_contraction = 0;
  /// Unit indicator of a connected component that no sensor touches; empty
  /// when every component is measured. The gramian vanishes along it.
  Eigen::VectorXd null_direction;
  int samples = 0;
  bool detectable = false;
};

/// Observability gramian W = sum_{i=0..q} (Phi^i)^T C^T C Phi^i.
Eigen::MatrixXd observability_gramian(const Eigen::MatrixXd &phi,
                                      const Eigen::MatrixXd &c, int q);

/// Evidence for a fixed topology and a set of sampled system matrices.
DetectabilityReport
detectability_evidence(const ThermalGraph &g,
                       const std::vector<Eigen::MatrixXd> &a_samples,
                       const Eigen::MatrixXd &c, double dt, int q);

/// Graph connectivity plus the row-sum condition on C decide the verdict;
/// the gramian figures are evaluated at each sampled state.
DetectabilityReport check_detectability(const LpvSystem &sys,
                                        const std::vector<StateVector> &samples,
                                        double dt, int q);

} // namespace tes

#endif // TES_GRAPH_HPP
