#ifndef TES_SOC_HPP
#define TES_SOC_HPP

#include "tes/grid.hpp"

namespace tes {

/// Bounds of the state-of-charge scale. h_min/h_max are derived from the
/// grid via make_soc_params and never entered by hand.
struct SocParams {
  double t_min{}; ///< [K]
  double t_max{}; ///< [K]
  double h_min{}; ///< total enthalpy at uniform t_min [J]
  double h_max{}; ///< total enthalpy at uniform t_max [J]
};

/// Enthalpy stored in the CPCM cells relative to t_pc [J]. Fluid and plate
/// cells do not contribute.
double total_enthalpy(const StateVector &x, const GridSpec &grid,
                      const PcmThermalParams<double> &p);

/// Enthalpy of every cell relative to t_pc, including fluid and plate [J].
/// This is the quantity conserved by insulated zero-flow dynamics.
double system_enthalpy(const StateVector &x, const GridSpec &grid,
                       const PcmThermalParams<double> &p);

SocParams make_soc_params(const GridSpec &grid,
                          const PcmThermalParams<double> &p, double t_min,
                          double t_max);

/// 1 at (or below) the minimum stored energy, 0 at (or above) the maximum.
double state_of_charge(double h, const SocParams &s);

/// Convenience: SOC of a temperature field.
double state_of_charge(const StateVector &x, const GridSpec &grid,
                       const PcmThermalParams<double> &p, const SocParams &s);

} // namespace tes

#endif // TES_SOC_HPP
