#ifndef TES_GRID_HPP
#define TES_GRID_HPP

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tes/material.hpp"

namespace tes {

/// Control-volume temperatures [K]: fluid layer first, then plate, then the
/// CPCM layers, each layer ordered inlet to outlet.
using StateVector = Eigen::VectorXd;

enum class CellRole { Fluid, Plate, Cpcm };

const char *to_string(CellRole role);

/// Rectangular nx-by-ny lattice of control volumes. Layer 0 is the fluid
/// channel, layer 1 the separator plate, layers 2.. the CPCM. Cell j sits in
/// layer j / nx and column j % nx; fluid flows from column 0 to column nx-1.
class GridSpec {
public:
  GridSpec() = default;

  /// `layer_height` has ny entries; `mass`, `specific_heat` and
  /// `conductivity` have nx*ny entries. `specific_heat` is used for fluid and
  /// plate cells only (CPCM heat capacity is temperature dependent).
  GridSpec(int nx, int ny, double dx, double dz,
           std::vector<double> layer_height, std::vector<double> mass,
           std::vector<double> specific_heat, std::vector<double> conductivity);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int size() const { return nx_ * ny_; }

  int layer(int j) const { return j / nx_; }
  int column(int j) const { return j % nx_; }
  int index(int layer, int column) const { return layer * nx_ + column; }
  CellRole role(int j) const;

  double dx() const { return dx_; }
  double dz() const { return dz_; }
  double layer_height(int layer) const { return layer_height_[layer]; }
  double mass(int j) const { return mass_[j]; }
  double specific_heat(int j) const { return specific_heat_[j]; }
  double conductivity(int j) const { return conductivity_[j]; }

  void set_mass(int j, double m);

  /// Cells in the CPCM layers.
  std::vector<int> cpcm_cells() const;

  /// True when cells i and j share a face.
  bool adjacent(int i, int j) const;

  /// Area of the face shared by adjacent cells i and j [m^2].
  double face_area(int i, int j) const;

  /// Extent of cell j measured along the line joining it to neighbour i [m].
  double extent_towards(int j, int i) const;

private:
  int nx_ = 0;
  int ny_ = 0;
  double dx_ = 0;
  double dz_ = 0;
  std::vector<double> layer_height_;
  std::vector<double> mass_;
  std::vector<double> specific_heat_;
  std::vector<double> conductivity_;
};

struct SolidProps {
  double density{};      ///< [kg/m^3]
  double specific_heat{}; ///< [J/(kg K)], unused for the CPCM
  double conductivity{}; ///< [W/(m K)]
};

/// Physical description of one storage module cross-section.
struct ModuleGeometry {
  double length{};          ///< along the flow [m]
  double depth{};           ///< across the flow, out of plane [m]
  double fluid_height{};    ///< channel height [m]
  double plate_thickness{}; ///< [m]
  double cpcm_height{};     ///< total CPCM stack height [m]
  SolidProps fluid;         ///< density and conductivity of the working fluid
  SolidProps plate;
  SolidProps cpcm;
};

/// Discretizes `geom` into an nx-by-ny lattice with equal CPCM layers.
GridSpec make_grid(const ModuleGeometry &geom, const FluidParams &fluid,
                   int nx, int ny);

/// Piecewise-linear conductivity table k(T), clamped at the end points.
class ConductivityCurve {
public:
  ConductivityCurve() = default;
  explicit ConductivityCurve(std::vector<std::pair<double, double>> points);

  bool empty() const { return points_.empty(); }
  double operator()(double t) const;
  const std::vector<std::pair<double, double>> &points() const {
    return points_;
  }

private:
  std::vector<std::pair<double, double>> points_;
};

/// Grid plus the material data needed to evaluate the state-dependent
/// matrices.
struct ThermalModel {
  GridSpec grid;
  FluidParams fluid;
  PcmThermalParams<double> pcm;
  ConductivityCurve cpcm_conductivity; ///< empty: use the grid constants

  int size() const { return grid.size(); }

  /// Conductivity of cell j at temperature t.
  double conductivity(int j, double t) const;

  /// Heat capacity m_j c_p,j(T_j) [J/K].
  double heat_capacity(int j, double t) const;

  void validate() const;
};

/// Throws on length mismatch or non-finite entries. Returns false when some
/// temperature leaves the plausible 200..400 K band.
bool check_state(const StateVector &x, const GridSpec &grid);

} // namespace tes

#endif // TES_GRID_HPP
