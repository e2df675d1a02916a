#include "tes/soc.hpp"

#include "tes/errors.hpp"

namespace tes {

double total_enthalpy(const StateVector &x, const GridSpec &grid,
                      const PcmThermalParams<double> &p) {
  check_state(x, grid);
  double h = 0;
  for (int j : grid.cpcm_cells())
    h += grid.mass(j) * specific_enthalpy(x[j], p);
  return h;
}

double system_enthalpy(const StateVector &x, const GridSpec &grid,
                       const PcmThermalParams<double> &p) {
  check_state(x, grid);
  double h = 0;
  for (int j = 0; j < grid.size(); ++j) {
    if (grid.role(j) == CellRole::Cpcm)
      h += grid.mass(j) * specific_enthalpy(x[j], p);
    else
      h += grid.mass(j) * grid.specific_heat(j) * (x[j] - p.t_pc);
  }
  return h;
}

SocParams make_soc_params(const GridSpec &grid,
                          const PcmThermalParams<double> &p, double t_min,
                          double t_max) {
  if (!(t_min < p.t_pc) || !(p.t_pc < t_max))
    throw InvalidConfig("SOC bounds must satisfy t_min < t_pc < t_max");
  SocParams s;
  s.t_min = t_min;
  s.t_max = t_max;
  s.h_min = total_enthalpy(StateVector::Constant(grid.size(), t_min), grid, p);
  s.h_max = total_enthalpy(StateVector::Constant(grid.size(), t_max), grid, p);
  if (!(s.h_min < s.h_max))
    throw InvalidConfig("SOC bounds: grid has no CPCM enthalpy range");
  return s;
}

double state_of_charge(double h, const SocParams &s) {
  if (!(s.h_min < s.h_max))
    throw InvalidConfig("SOC parameters require h_min < h_max");
  if (h < s.h_min)
    return 1.0;
  if (h > s.h_max)
    return 0.0;
  return (s.h_max - h) / (s.h_max - s.h_min);
}

double state_of_charge(const StateVector &x, const GridSpec &grid,
                       const PcmThermalParams<double> &p, const SocParams &s) {
  return state_of_charge(total_enthalpy(x, grid, p), s);
}

} // namespace tes
