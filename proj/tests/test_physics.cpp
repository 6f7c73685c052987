#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "stflow/physics.hpp"

using namespace stflow;

namespace {

FluidRockModel default_model() {
  FluidRockModel m;
  m.rock.kx.emplace_back(1, 1, 100.0);
  m.rock.ky.emplace_back(1, 1, 100.0);
  m.rock.porosity.emplace_back(1, 1, 0.2);
  return m;
}

}  // namespace

TEST(Density, ReferencePointAndCompressibility) {
  FluidProps f;
  EXPECT_DOUBLE_EQ(density(f.water, 1000.0).value, 64.0);
  EXPECT_NEAR(density(f.water, 2000.0).value, 64.0 * std::exp(0.003), 1e-12);
  EXPECT_NEAR(density(f.water, 2000.0).value, 64.1923, 1e-4);
  PhaseProps incompressible{53.0, 1000.0, 0.0, 3.0};
  EXPECT_DOUBLE_EQ(density(incompressible, 12345.0).value, 53.0);
  EXPECT_DOUBLE_EQ(density(incompressible, 12345.0).deriv, 0.0);
}

TEST(RelPerm, EndpointsAndInteriorValue) {
  BrooksCoreyParams bc;
  EXPECT_DOUBLE_EQ(relperm(bc, Phase::Water, 0.2).value, 0.0);
  EXPECT_DOUBLE_EQ(relperm(bc, Phase::Oil, 0.8).value, 0.0);
  EXPECT_NEAR(relperm(bc, Phase::Water, 0.5).value, 0.25, 1e-15);
  EXPECT_DOUBLE_EQ(relperm(bc, Phase::Water, 1.0).value, 1.0);
  EXPECT_DOUBLE_EQ(relperm(bc, Phase::Oil, 0.0).value, 1.0);
  // Clamped regions have zero slope.
  EXPECT_DOUBLE_EQ(relperm(bc, Phase::Water, 0.1).deriv, 0.0);
  EXPECT_DOUBLE_EQ(relperm(bc, Phase::Oil, 0.9).deriv, 0.0);
}

TEST(CapillaryPressure, ValuesMonotonicityAndFloor) {
  BrooksCoreyParams bc;
  EXPECT_NEAR(capillary_pressure(bc, 1.0).value, 10.0, 1e-12);
  EXPECT_NEAR(capillary_pressure(bc, 0.6).value, 10.0 * std::pow(2.0, 0.2), 1e-12);
  EXPECT_NEAR(capillary_pressure(bc, 0.6).value, 11.4870, 5e-5);
  EXPECT_GT(capillary_pressure(bc, 0.4).value, capillary_pressure(bc, 0.6).value);
  // Tangent continuation below s_wirr + 0.01: value 10*80^0.2, slope -0.2*pc/0.01.
  const double knee = 10.0 * std::pow(80.0, 0.2);
  EXPECT_NEAR(capillary_pressure(bc, 0.21).value, knee, 1e-12);
  EXPECT_NEAR(capillary_pressure(bc, 0.2).value, knee + 0.2 * knee, 1e-9);
  EXPECT_NEAR(capillary_pressure(bc, 0.2).deriv, -20.0 * knee, 1e-8);
  EXPECT_NEAR(capillary_pressure(bc, 0.21 + 1e-9).deriv, -20.0 * knee, 1e-4);
  // Without the continuation: the floor value below s_wirr, zero slope.
  bc.pc_linear_width = 0.0;
  const double at_floor = capillary_pressure(bc, bc.s_wirr + kSaturationFloor).value;
  EXPECT_TRUE(std::isfinite(capillary_pressure(bc, 0.2).value));
  EXPECT_DOUBLE_EQ(capillary_pressure(bc, 0.2).value, at_floor);
  EXPECT_DOUBLE_EQ(capillary_pressure(bc, 0.1).value, at_floor);
  EXPECT_DOUBLE_EQ(capillary_pressure(bc, 0.1).deriv, 0.0);
  bc.entry_pressure = 0.0;
  EXPECT_DOUBLE_EQ(capillary_pressure(bc, 0.3).value, 0.0);
}

TEST(Mobility, WaterAtIrreducibleAndHandValue) {
  const auto m = default_model();
  EXPECT_DOUBLE_EQ(mobility(m, Phase::Water, 1000.0, 0.2).value, 0.0);
  // p_w = p_o - p_c; with zero entry pressure the water density is at reference.
  auto m0 = m;
  m0.relperm.entry_pressure = 0.0;
  EXPECT_NEAR(mobility(m0, Phase::Water, 1000.0, 0.5).value, 0.25 * 64.0 / 0.3, 1e-10);
  EXPECT_NEAR(mobility(m0, Phase::Water, 1000.0, 0.5).value, 53.333, 1e-3);
  auto m2 = m0;
  m2.fluid.water.mu *= 2.0;
  EXPECT_NEAR(mobility(m2, Phase::Water, 1000.0, 0.5).value, 0.5 * mobility(m0, Phase::Water, 1000.0, 0.5).value,
              1e-12);
}

TEST(UpwindMobility, UpstreamControlAndBranches) {
  auto m = default_model();
  m.relperm.entry_pressure = 0.0;
  // Positive flux: upstream (minus) cell at s_wirr gives zero water mobility.
  EXPECT_DOUBLE_EQ(upwind_mobility(m, Phase::Water, 1.0, 1000, 0.2, 1000, 0.7).value, 0.0);
  // Negative flux and ties take the plus side.
  const double rho = 64.0;
  const double kr_plus = relperm(m.relperm, Phase::Water, 0.7).value;
  EXPECT_NEAR(upwind_mobility(m, Phase::Water, -1.0, 1000, 0.2, 1000, 0.7).value, rho * kr_plus / 0.3, 1e-12);
  EXPECT_FALSE(upwind_mobility(m, Phase::Water, 0.0, 1000, 0.2, 1000, 0.7).from_minus);
  // Equal states: both branches equal the centred value.
  const double c = centered_mobility(m, Phase::Oil, 1200, 0.4, 1000, 0.4);
  EXPECT_NEAR(upwind_mobility(m, Phase::Oil, 1.0, 1200, 0.4, 1000, 0.4).value, c, 1e-12);
  EXPECT_NEAR(upwind_mobility(m, Phase::Oil, -1.0, 1200, 0.4, 1000, 0.4).value, c, 1e-12);
}

TEST(PhysicsProperties, AnalyticDerivativesMatchCentralDifferences) {
  const auto m = default_model();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> ps(500.0, 3000.0), ss(0.25, 0.75);
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); };
  for (int n = 0; n < 100; ++n) {
    const double p = ps(rng), s = ss(rng);
    const double hp = 1e-3, hs = 1e-6;
    for (Phase ph : kPhases) {
      const auto d = density(m.fluid[ph], p);
      const double fd = (density(m.fluid[ph], p + hp).value - density(m.fluid[ph], p - hp).value) / (2 * hp);
      EXPECT_LE(rel(d.deriv, fd), 1e-6);
      const auto k = relperm(m.relperm, ph, s);
      const double fk =
          (relperm(m.relperm, ph, s + hs).value - relperm(m.relperm, ph, s - hs).value) / (2 * hs);
      EXPECT_LE(rel(k.deriv, fk), 1e-6);
      const auto lam = mobility(m, ph, p, s);
      const double flp = (mobility(m, ph, p + hp, s).value - mobility(m, ph, p - hp, s).value) / (2 * hp);
      const double fls = (mobility(m, ph, p, s + hs).value - mobility(m, ph, p, s - hs).value) / (2 * hs);
      EXPECT_LE(rel(lam.d_p, flp), 1e-6);
      EXPECT_LE(rel(lam.d_s, fls), 1e-6);
    }
    const auto pc = capillary_pressure(m.relperm, s);
    const double fpc =
        (capillary_pressure(m.relperm, s + hs).value - capillary_pressure(m.relperm, s - hs).value) / (2 * hs);
    EXPECT_LE(rel(pc.deriv, fpc), 1e-6);
  }
}

TEST(PhysicsProperties, RangesHoldOverAdmissibleInputs) {
  const auto m = default_model();
  for (int i = 0; i <= 100; ++i) {
    const double s = i / 100.0;
    for (Phase ph : kPhases) {
      const auto kr = relperm(m.relperm, ph, s).value;
      EXPECT_GE(kr, 0.0);
      EXPECT_LE(kr, 1.0);
      EXPECT_GE(mobility(m, ph, 1000.0, s).value, 0.0);
      EXPECT_GT(phase_density(m, ph, 1000.0, s).value, 0.0);
    }
  }
}

TEST(BrooksCoreyParams, ValidationNamesKeys) {
  BrooksCoreyParams bc;
  bc.s_wirr = 0.6;
  bc.s_or = 0.6;
  try {
    bc.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("s_wirr"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("s_or"), std::string::npos);
  }
}
