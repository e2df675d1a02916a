#include "tes/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tes/errors.hpp"

namespace tes {

const char *to_string(CellRole role) {
  switch (role) {
  case CellRole::Fluid:
    return "fluid";
  case CellRole::Plate:
    return "plate";
  case CellRole::Cpcm:
    return "cpcm";
  }
  return "?";
}

namespace {

void require_positive(const std::vector<double> &values, const char *what) {
  for (double v : values)
    if (!(v > 0) || !std::isfinite(v))
      throw InvalidConfig(std::string("grid: every ") + what +
                          " must be positive and finite");
}

} // namespace

GridSpec::GridSpec(int nx, int ny, double dx, double dz,
                   std::vector<double> layer_height, std::vector<double> mass,
                   std::vector<double> specific_heat,
                   std::vector<double> conductivity)
    : nx_(nx), ny_(ny), dx_(dx), dz_(dz),
      layer_height_(std::move(layer_height)), mass_(std::move(mass)),
      specific_heat_(std::move(specific_heat)),
      conductivity_(std::move(conductivity)) {
  if (nx < 1 || ny < 2)
    throw InvalidConfig("grid: need nx >= 1 and ny >= 2 (fluid and plate)");
  const auto n = static_cast<std::size_t>(nx * ny);
  if (layer_height_.size() != static_cast<std::size_t>(ny) ||
      mass_.size() != n || specific_heat_.size() != n ||
      conductivity_.size() != n)
    throw InvalidConfig("grid: per-layer or per-cell array has wrong length");
  if (!(dx > 0) || !(dz > 0))
    throw InvalidConfig("grid: cell dimensions must be positive");
  require_positive(layer_height_, "layer height");
  require_positive(mass_, "mass");
  require_positive(specific_heat_, "specific heat");
  require_positive(conductivity_, "conductivity");
}

CellRole GridSpec::role(int j) const {
  const int l = layer(j);
  if (l == 0)
    return CellRole::Fluid;
  if (l == 1)
    return CellRole::Plate;
  return CellRole::Cpcm;
}

void GridSpec::set_mass(int j, double m) {
  if (!(m > 0))
    throw InvalidInput("grid: mass must be positive");
  mass_.at(static_cast<std::size_t>(j)) = m;
}

std::vector<int> GridSpec::cpcm_cells() const {
  std::vector<int> cells;
  for (int j = 2 * nx_; j < size(); ++j)
    cells.push_back(j);
  return cells;
}

bool GridSpec::adjacent(int i, int j) const {
  if (i < 0 || j < 0 || i >= size() || j >= size() || i == j)
    return false;
  const int dl = std::abs(layer(i) - layer(j));
  const int dc = std::abs(column(i) - column(j));
  return dl + dc == 1;
}

double GridSpec::face_area(int i, int j) const {
  if (!adjacent(i, j))
    throw InvalidInput("face_area: cells " + std::to_string(i) + " and " +
                       std::to_string(j) + " are not adjacent");
  if (layer(i) == layer(j))
    return layer_height(layer(i)) * dz_;
  return dx_ * dz_;
}

double GridSpec::extent_towards(int j, int i) const {
  if (!adjacent(i, j))
    throw InvalidInput("extent_towards: cells are not adjacent");
  return layer(i) == layer(j) ? dx_ : layer_height(layer(j));
}

GridSpec make_grid(const ModuleGeometry &g, const FluidParams &fluid, int nx,
                   int ny) {
  if (nx < 1 || ny < 3)
    throw InvalidConfig("make_grid: need nx >= 1 and ny >= 3");
  const double dx = g.length / nx;
  std::vector<double> heights(static_cast<std::size_t>(ny),
                              g.cpcm_height / (ny - 2));
  heights[0] = g.fluid_height;
  heights[1] = g.plate_thickness;

  const auto n = static_cast<std::size_t>(nx * ny);
  std::vector<double> mass(n), cp(n), kappa(n);
  for (int l = 0; l < ny; ++l) {
    const SolidProps &mat = l == 0 ? g.fluid : (l == 1 ? g.plate : g.cpcm);
    const double c = l == 0 ? fluid.cp : (l == 1 ? g.plate.specific_heat : 1.0);
    for (int col = 0; col < nx; ++col) {
      const auto j = static_cast<std::size_t>(l * nx + col);
      mass[j] = mat.density * dx * heights[l] * g.depth;
      cp[j] = c;
      kappa[j] = mat.conductivity;
    }
  }
  return GridSpec(nx, ny, dx, g.depth, std::move(heights), std::move(mass),
                  std::move(cp), std::move(kappa));
}

ConductivityCurve::ConductivityCurve(
    std::vector<std::pair<double, double>> points)
    : points_(std::move(points)) {
  std::sort(points_.begin(), points_.end());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!(points_[i].second > 0))
      throw InvalidConfig("conductivity table: values must be positive");
    if (i > 0 && points_[i].first == points_[i - 1].first)
      throw InvalidConfig("conductivity table: duplicate temperature");
  }
}

double ConductivityCurve::operator()(double t) const {
  if (points_.empty())
    throw InvalidInput("conductivity table is empty");
  if (t <= points_.front().first)
    return points_.front().second;
  if (t >= points_.back().first)
    return points_.back().second;
  auto hi = std::upper_bound(
      points_.begin(), points_.end(), t,
      [](double v, const std::pair<double, double> &p) { return v < p.first; });
  auto lo = hi - 1;
  const double w = (t - lo->first) / (hi->first - lo->first);
  return lo->second + w * (hi->second - lo->second);
}

double ThermalModel::conductivity(int j, double t) const {
  if (grid.role(j) == CellRole::Cpcm && !cpcm_conductivity.empty())
    return cpcm_conductivity(t);
  return grid.conductivity(j);
}

double ThermalModel::heat_capacity(int j, double t) const {
  if (grid.role(j) == CellRole::Cpcm)
    return grid.mass(j) * effective_specific_heat(t, pcm);
  return grid.mass(j) * grid.specific_heat(j);
}

void ThermalModel::validate() const {
  if (grid.size() == 0)
    throw InvalidConfig("model: empty grid");
  fluid.validate();
  pcm.validate();
}

bool check_state(const StateVector &x, const GridSpec &grid) {
  if (x.size() != grid.size())
    throw InvalidInput("state has " + std::to_string(x.size()) +
                       " entries, grid has " + std::to_string(grid.size()));
  bool plausible = true;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (!std::isfinite(x[j]))
      throw InvalidInput("state entry " + std::to_string(j) +
                         " is not finite");
    if (x[j] <= 200.0 || x[j] >= 400.0)
      plausible = false;
  }
  return plausible;
}

} // namespace tes
