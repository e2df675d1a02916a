#ifndef TES_MATERIAL_HPP
#define TES_MATERIAL_HPP

// Thermophysical primitives of the composite phase-change material (CPCM):
// effective specific heat, melt fraction and specific enthalpy. All
// temperatures are absolute kelvin.

#include <algorithm>
#include <cmath>
#include <string>

#include "tes/errors.hpp"

namespace tes {

/// Exponent arguments are clamped to this magnitude so that extreme
/// temperatures evaluate to the asymptotic limits instead of inf/nan.
inline constexpr double kMaxExponent = 500.0;

template <typename Scalar = double> struct PcmThermalParams {
  Scalar cp_sol{};     ///< solid specific heat [J/(kg K)]
  Scalar cp_liq{};     ///< liquid specific heat [J/(kg K)]
  Scalar h_fus{};      ///< specific enthalpy of fusion [J/kg]
  Scalar t_pc{};       ///< phase-change temperature [K]
  Scalar delta_t_pc{}; ///< width of the latent band [K]

  /// Width parameter of the logistic melt profile [1/K].
  Scalar alpha() const { return Scalar(8) / delta_t_pc; }

  void validate() const {
    if (!(cp_sol > 0) || !(cp_liq > 0) || !(h_fus > 0) || !(delta_t_pc > 0) ||
        !std::isfinite(double(t_pc)))
      throw InvalidConfig("PCM parameters must satisfy cp_sol, cp_liq, "
                          "h_fus, delta_t_pc > 0 and finite t_pc");
  }

  /// Parameters whose width parameter equals `alpha` exactly.
  static PcmThermalParams with_alpha(Scalar cp_sol, Scalar cp_liq,
                                     Scalar h_fus, Scalar t_pc, Scalar alpha) {
    return {cp_sol, cp_liq, h_fus, t_pc, Scalar(8) / alpha};
  }
};

struct FluidParams {
  double cp{}; ///< working-fluid specific heat [J/(kg K)]
  double htc{}; ///< convective coefficient U [W/(m^2 K)]

  void validate() const {
    if (!(cp > 0) || !(htc > 0))
      throw InvalidConfig("fluid cp and heat transfer coefficient must be > 0");
  }
};

namespace detail {

template <typename Scalar> void require_finite(Scalar t, const char *what) {
  if (!std::isfinite(double(t)))
    throw InvalidInput(std::string(what) + ": temperature is not finite");
}

template <typename Scalar> Scalar clamped_exponent(Scalar z) {
  return std::clamp(z, Scalar(-kMaxExponent), Scalar(kMaxExponent));
}

template <typename Scalar> Scalar logistic(Scalar z) {
  z = clamped_exponent(z);
  if (z >= 0)
    return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

// log(1 + e^z) without overflow.
template <typename Scalar> Scalar softplus(Scalar z) {
  return std::max(z, Scalar(0)) + std::log1p(std::exp(-std::abs(z)));
}

} // namespace detail

/// Liquid volume fraction of the CPCM, a logistic curve centred on t_pc.
template <typename Scalar>
Scalar melt_fraction(Scalar t, const PcmThermalParams<Scalar> &p) {
  detail::require_finite(t, "melt_fraction");
  return detail::logistic(p.alpha() * (t - p.t_pc));
}

/// Effective specific heat [J/(kg K)]: sensible blend of the solid and liquid
/// values plus a bell-shaped latent term that integrates to h_fus.
template <typename Scalar>
Scalar effective_specific_heat(Scalar t, const PcmThermalParams<Scalar> &p) {
  detail::require_finite(t, "effective_specific_heat");
  const Scalar a = p.alpha();
  const Scalar z = detail::clamped_exponent(a * (t - p.t_pc));
  const Scalar latent =
      p.h_fus * a / (Scalar(2) + std::exp(-z) + std::exp(z));
  return p.cp_sol + (p.cp_liq - p.cp_sol) * detail::logistic(z) + latent;
}

/// Specific enthalpy [J/kg] relative to t_pc: the closed-form antiderivative
/// of effective_specific_heat, zero at t = t_pc.
template <typename Scalar>
Scalar specific_enthalpy(Scalar t, const PcmThermalParams<Scalar> &p) {
  detail::require_finite(t, "specific_enthalpy");
  const Scalar a = p.alpha();
  const Scalar dt = t - p.t_pc;
  const Scalar z = a * dt;
  return p.h_fus / Scalar(2) * std::tanh(z / Scalar(2)) + dt * p.cp_sol +
         (p.cp_liq - p.cp_sol) / a *
             (detail::softplus(z) - std::log(Scalar(2)));
}

} // namespace tes

#endif // TES_MATERIAL_HPP
