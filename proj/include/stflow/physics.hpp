#pragma once

// Constitutive models for the oil/water system: slightly compressible phase
// densities, Brooks-Corey relative permeability and capillary pressure, phase
// mobilities and upwinding. Every function returns its analytic derivative
// alongside the value so the Jacobian can be assembled without differencing.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "stflow/error.hpp"
#include "stflow/field.hpp"

namespace stflow {

enum class Phase : int { Oil = 0, Water = 1 };
inline constexpr std::array<Phase, 2> kPhases{Phase::Oil, Phase::Water};
inline constexpr int index(Phase p) { return static_cast<int>(p); }
inline const char* name(Phase p) { return p == Phase::Oil ? "oil" : "water"; }

/// Field-unit Darcy constant: ft^3/day from md * ft^2 * psi / (cp * ft).
inline constexpr double kDarcyConstant = 6.3283e-3;
/// (lb/ft^3) * (ft/s^2) * ft -> psi.
inline constexpr double kGravityToPsi = 1.0 / (144.0 * 32.174049);
/// Floor above s_wirr at which capillary pressure is evaluated.
inline constexpr double kSaturationFloor = 1e-6;

struct PhaseProps {
  double rho_ref = 1.0;   // lb/ft^3
  double p_ref = 1000.0;  // psi
  double c_f = 0.0;       // 1/psi
  double mu = 1.0;        // cp

  void validate(const std::string& who) const {
    if (!(rho_ref > 0)) throw ConfigError(who + ": reference density must be positive");
    if (!(c_f >= 0)) throw ConfigError(who + ": compressibility must be non-negative");
    if (!(mu > 0)) throw ConfigError(who + ": viscosity must be positive");
  }

  bool operator==(const PhaseProps&) const = default;
};

struct FluidProps {
  PhaseProps oil{53.0, 1000.0, 1e-4, 3.0};
  PhaseProps water{64.0, 1000.0, 3e-6, 0.3};
  std::array<double, 2> gravity{0.0, 0.0};  // in-plane, ft/s^2

  const PhaseProps& operator[](Phase p) const { return p == Phase::Oil ? oil : water; }
  void validate() const {
    oil.validate("oil");
    water.validate("water");
  }

  bool operator==(const FluidProps&) const = default;
};

struct BrooksCoreyParams {
  double s_wirr = 0.2;
  double s_or = 0.2;
  double krw0 = 1.0;
  double kro0 = 1.0;
  double n_w = 2.0;
  double n_o = 2.0;
  double entry_pressure = 10.0;  // P_en,cow, psi
  double pc_exponent = 0.2;      // l_cow
  // Below s_wirr + pc_linear_width the curve is continued by its tangent.
  // Zero keeps the raw curve down to the floor and a constant value below.
  double pc_linear_width = 0.01;

  void validate() const {
    if (s_wirr < 0) throw ConfigError("s_wirr must be non-negative");
    if (s_or < 0) throw ConfigError("s_or must be non-negative");
    if (!(s_wirr + s_or < 1)) throw ConfigError("s_wirr + s_or must be below 1");
    if (!(krw0 > 0 && krw0 <= 1)) throw ConfigError("krw0 must lie in (0, 1]");
    if (!(kro0 > 0 && kro0 <= 1)) throw ConfigError("kro0 must lie in (0, 1]");
    if (!(n_w > 0) || !(n_o > 0)) throw ConfigError("Corey exponents must be positive");
    if (!(entry_pressure >= 0)) throw ConfigError("entry pressure must be non-negative");
    if (!(pc_exponent > 0)) throw ConfigError("capillary exponent must be positive");
    if (!(pc_linear_width >= 0 && pc_linear_width < 1 - s_wirr)) throw ConfigError("pc_linear_width must lie in [0, 1 - s_wirr)");
  }

  bool operator==(const BrooksCoreyParams&) const = default;
};

struct ValueDeriv {
  double value = 0.0;
  double deriv = 0.0;
};

/// rho = rho_ref * exp(c_f (p - p_ref)); deriv is d rho / d p.
inline ValueDeriv density(const PhaseProps& ph, double p) {
  const double rho = ph.rho_ref * std::exp(ph.c_f * (p - ph.p_ref));
  return {rho, ph.c_f * rho};
}

/// Relative permeability of `phase` as a function of water saturation; deriv
/// is d kr / d s_w of the clamped expression.
inline ValueDeriv relperm(const BrooksCoreyParams& bc, Phase phase, double s_w) {
  const double mobile = 1.0 - bc.s_or - bc.s_wirr;
  if (phase == Phase::Water) {
    const double se = (s_w - bc.s_wirr) / mobile;
    if (se <= 0) return {0.0, 0.0};
    if (se >= 1) return {bc.krw0, 0.0};
    const double kr = bc.krw0 * std::pow(se, bc.n_w);
    return {kr, bc.krw0 * bc.n_w * std::pow(se, bc.n_w - 1) / mobile};
  }
  const double se = (1.0 - s_w - bc.s_or) / mobile;
  if (se <= 0) return {0.0, 0.0};
  if (se >= 1) return {bc.kro0, 0.0};
  const double kr = bc.kro0 * std::pow(se, bc.n_o);
  return {kr, -bc.kro0 * bc.n_o * std::pow(se, bc.n_o - 1) / mobile};
}

/// p_c = P_en ((1 - s_wirr) / (s_w - s_wirr))^l. With a linear width w the
/// curve below s_wirr + w is its tangent line there; the singular branch is
/// too stiff for Newton when cells start at s_wirr. With w = 0 it is held
/// constant below the floor s_wirr + kSaturationFloor.
inline ValueDeriv capillary_pressure(const BrooksCoreyParams& bc, double s_w) {
  if (bc.entry_pressure == 0.0) return {0.0, 0.0};
  auto raw = [&](double s) {
    const double pc = bc.entry_pressure * std::pow((1.0 - bc.s_wirr) / (s - bc.s_wirr), bc.pc_exponent);
    return ValueDeriv{pc, -bc.pc_exponent * pc / (s - bc.s_wirr)};
  };
  if (bc.pc_linear_width > 0) {
    const double knee = bc.s_wirr + bc.pc_linear_width;
    if (s_w >= knee) return raw(s_w);
    const auto k = raw(knee);
    return {k.value + k.deriv * (s_w - knee), k.deriv};
  }
  const double floor = bc.s_wirr + kSaturationFloor;
  if (s_w <= floor) return {raw(floor).value, 0.0};
  return raw(s_w);
}

/// Per-level rock properties. Level l covers a grid refined 2^l times relative
/// to the coarse grid; the finest level holds the input data.
struct RockField {
  std::vector<Field2D> kx;
  std::vector<Field2D> ky;
  std::vector<Field2D> porosity;

  int levels() const { return static_cast<int>(kx.size()); }

  void validate() const {
    if (kx.empty() || kx.size() != ky.size() || kx.size() != porosity.size())
      throw ConfigError("rock field: inconsistent level count");
    for (std::size_t l = 0; l < kx.size(); ++l) {
      for (double v : kx[l].values)
        if (!(v > 0)) throw ConfigError("rock field: permeability must be positive");
      for (double v : ky[l].values)
        if (!(v > 0)) throw ConfigError("rock field: permeability must be positive");
      for (double v : porosity[l].values)
        if (!(v > 0 && v <= 1)) throw ConfigError("rock field: porosity must lie in (0, 1]");
    }
  }
};

struct FluidRockModel {
  FluidProps fluid;
  BrooksCoreyParams relperm;
  RockField rock;
  double darcy_constant = kDarcyConstant;

  void validate() const {
    fluid.validate();
    relperm.validate();
    rock.validate();
    if (!(darcy_constant > 0)) throw ConfigError("darcy constant must be positive");
  }
};

/// Density of `phase` at a cell given oil pressure and water saturation.
/// Water density is evaluated at the water pressure p_o - p_c(s_w).
struct PhaseDensity {
  double value = 0.0;
  double d_p = 0.0;  // d / d p_o
  double d_s = 0.0;  // d / d s_w
};

inline PhaseDensity phase_density(const FluidRockModel& m, Phase phase, double p_o, double s_w) {
  if (phase == Phase::Oil) {
    const auto rho = density(m.fluid.oil, p_o);
    return {rho.value, rho.deriv, 0.0};
  }
  const auto pc = capillary_pressure(m.relperm, s_w);
  const auto rho = density(m.fluid.water, p_o - pc.value);
  return {rho.value, rho.deriv, -rho.deriv * pc.deriv};
}

/// Phase mobility lambda = kr * rho / mu with partial derivatives.
struct Mobility {
  double value = 0.0;
  double d_p = 0.0;
  double d_s = 0.0;
};

inline Mobility mobility(const FluidRockModel& m, Phase phase, double p_o, double s_w) {
  const auto kr = relperm(m.relperm, phase, s_w);
  const auto rho = phase_density(m, phase, p_o, s_w);
  const double mu = m.fluid[phase].mu;
  return {kr.value * rho.value / mu, kr.value * rho.d_p / mu,
          (kr.deriv * rho.value + kr.value * rho.d_s) / mu};
}

/// Upwind mobility on a face between cells j (minus side) and j+1 (plus side):
/// averaged density, relative permeability from the minus cell when the
/// auxiliary flux is strictly positive and from the plus cell otherwise.
struct UpwindMobility {
  double value = 0.0;
  bool from_minus = false;
  // partials with respect to minus/plus cell pressure and saturation
  double d_p_minus = 0.0, d_s_minus = 0.0, d_p_plus = 0.0, d_s_plus = 0.0;
};

inline UpwindMobility upwind_mobility(const FluidRockModel& m, Phase phase, double aux_flux,
                                      double p_minus, double s_minus, double p_plus, double s_plus) {
  UpwindMobility out;
  out.from_minus = aux_flux > 0;
  const double mu = m.fluid[phase].mu;
  const auto rho_m = phase_density(m, phase, p_minus, s_minus);
  const auto rho_p = phase_density(m, phase, p_plus, s_plus);
  const double rho_avg = 0.5 * (rho_m.value + rho_p.value);
  const auto kr = relperm(m.relperm, phase, out.from_minus ? s_minus : s_plus);
  out.value = rho_avg * kr.value / mu;
  out.d_p_minus = 0.5 * rho_m.d_p * kr.value / mu;
  out.d_p_plus = 0.5 * rho_p.d_p * kr.value / mu;
  out.d_s_minus = 0.5 * rho_m.d_s * kr.value / mu;
  out.d_s_plus = 0.5 * rho_p.d_s * kr.value / mu;
  if (out.from_minus)
    out.d_s_minus += rho_avg * kr.deriv / mu;
  else
    out.d_s_plus += rho_avg * kr.deriv / mu;
  return out;
}

/// Face mobility with averaged density and averaged relative permeability.
inline double centered_mobility(const FluidRockModel& m, Phase phase, double p_minus, double s_minus,
                                double p_plus, double s_plus) {
  const double rho = 0.5 * (phase_density(m, phase, p_minus, s_minus).value +
                            phase_density(m, phase, p_plus, s_plus).value);
  const double kr = 0.5 * (relperm(m.relperm, phase, s_minus).value +
                           relperm(m.relperm, phase, s_plus).value);
  return rho * kr / m.fluid[phase].mu;
}

}  // namespace stflow
