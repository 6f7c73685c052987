#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "stflow/estimators.hpp"
#include "stflow/newton.hpp"

using namespace stflow;

namespace {

double max_of(const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

std::vector<ColumnStart> start_from(const SpaceTimeMesh& m, const FluidRockModel& model, double p, double s) {
  return column_start(m, initial_history(m.grid(), m.levels(), model, p, s));
}

}  // namespace

TEST(TemporalEstimator, HandCase) {
  // u goes from 1 to 3 over dtau = 3 on a unit cell with K = 1.
  EXPECT_EQ(temporal_estimator(1.0, 4.0, 3.0), 2.0);
  EXPECT_EQ(temporal_estimator(1.0, 0.0, 3.0), 0.0);
}

TEST(CellVelocities, UniformFlowThroughRefinedColumn) {
  // Uniform x-flow of density 2 ft/day through a mesh with hanging nodes.
  auto g = fixtures::grid(2, 2);
  auto m = smooth(refine_temporal(refine_spatial(build_coarse(g, MeshLevels{1, 1, 2}), std::vector<int>{0}),
                                  std::vector<int>{3}));
  std::vector<double> rate(m.num_interior_subfaces(), 0.0);
  for (std::size_t f = 0; f < rate.size(); ++f)
    if (m.subfaces()[f].orientation == Orientation::X) rate[f] = 2.0 * m.subfaces()[f].area();
  const auto v = cell_velocities(m, rate);
  for (const auto& el : m.elements()) {
    // Boundary sides carry no flux, so boundary cells see half the density.
    const bool edge = el.x0 == 0.0 || el.x1 == 16.0;
    EXPECT_NEAR(v[el.id][0], edge ? 1.0 : 2.0, 1e-12) << el.id;
    EXPECT_NEAR(v[el.id][1], 0.0, 1e-12);
  }
}

TEST(ComputeEstimators, SteadySinglePhaseHasNoTemporalVariation) {
  auto g = fixtures::grid(3, 3);
  auto model = fixtures::heterogeneous(g, 0);
  model.fluid.water.c_f = 0.0;
  model.fluid.oil.c_f = 0.0;
  model.relperm.entry_pressure = 0.0;
  const MeshLevels lv{0, 2, 2};
  std::vector<WellSpec> wells{{WellKind::RateInjector, 0, 0, 3.0, 0.1}, {WellKind::BhpProducer, 2, 2, 900.0, 0.1}};
  NewtonConfig cfg;
  cfg.tol_rel = 1e-13;
  cfg.tol_abs = 1e-14;
  auto h = initial_history(g, lv, model, 1000.0, 1.0);

  auto m0 = build_coarse(g, lv);
  Assembler a0(m0, model, wells, column_start(m0, h));
  const auto s0 = newton_solve(a0, uniform_state(m0, 1000.0, 1.0), cfg, LinearConfig{}).state;
  const auto flow = flow_history(a0, s0);

  auto g1 = g;
  g1.step = 1;
  auto m1 = smooth(refine_temporal(refine_temporal(build_coarse(g1, lv), std::vector<int>{4}), std::vector<int>{0}));
  Assembler a1(m1, model, wells, column_start(m1, history_from_state(m0, s0, model)));
  const auto s1 = newton_solve(a1, uniform_state(m1, 1000.0, 1.0), cfg, LinearConfig{}).state;
  const auto ind = compute_estimators(a1, s1, EstimatorInputs{nullptr, &flow, nullptr});
  for (Phase ph : kPhases) {
    EXPECT_LE(max_of(ind.eta_tf[index(ph)]), 1e-12);
    EXPECT_LE(max_of(ind.eta_tp[index(ph)]), 1e-12);
  }
  // The flow itself is not trivial.
  EXPECT_GT(max_of(ind.eta_sp[index(Phase::Water)]), 1e-3);
}

TEST(ComputeEstimators, RestStateIsZeroAndFrontIsNot) {
  auto g = fixtures::grid(4, 2);
  auto model = fixtures::homogeneous(g, 1);
  auto m = smooth(refine_temporal(build_coarse(g, MeshLevels{1, 1, 2}), std::vector<int>{0}));
  Assembler a(m, model, {}, start_from(m, model, 1000.0, 0.3));
  const auto rest = compute_estimators(a, uniform_state(m, 1000.0, 0.3));
  for (const auto* pv : {&rest.eta_tr, &rest.eta_sr, &rest.eta_tf, &rest.eta_sf, &rest.eta_tp, &rest.eta_sp})
    for (const auto& v : *pv) EXPECT_EQ(max_of(v), 0.0);
  EXPECT_EQ(max_of(rest.eps_t), 0.0);
  EXPECT_EQ(max_of(rest.eps_s), 0.0);

  std::vector<WellSpec> wells{{WellKind::RateInjector, 0, 0, 5.0, 0.1}, {WellKind::BhpProducer, 7, 3, 1000.0, 0.1}};
  Assembler b(m, model, wells, start_from(m, model, 1000.0, 0.2));
  const auto guess = uniform_state(m, 1000.0, 0.2);
  const auto sol = newton_solve(b, guess, NewtonConfig{}, LinearConfig{}).state;
  const auto raw = compute_estimators(b, sol, EstimatorInputs{&guess, nullptr, nullptr});
  const auto nrm = normalized(raw);
  for (const auto* pv : {&raw.eta_tr, &raw.eta_sr, &raw.eta_tf, &raw.eta_sf, &raw.eta_tp, &raw.eta_sp})
    for (const auto& v : *pv)
      for (double x : v) EXPECT_GE(x, 0.0);
  EXPECT_GT(max_of(raw.eta_tr[index(Phase::Water)]), 0.0);
  EXPECT_DOUBLE_EQ(max_of(nrm.eta_tf[index(Phase::Water)]), 1.0);
  EXPECT_DOUBLE_EQ(max_of(nrm.eps_t), 1.0);
  // Residual estimators of the converged state vanish to the Newton tolerance.
  const auto conv = compute_estimators(b, sol);
  EXPECT_LE(max_of(conv.eta_tr[index(Phase::Water)]), 1e-6 * max_of(raw.eta_tr[index(Phase::Water)]));
}

TEST(SaturationGradients, HandCases) {
  auto g = fixtures::grid(2, 1, 1.0, 10.0);
  auto model = fixtures::homogeneous(g, 0);
  auto m = build_coarse(g, MeshLevels{});
  Assembler a(m, model, {}, start_from(m, model, 1000.0, 0.2));
  State st = uniform_state(m, 1000.0, 0.5);
  auto ind = compute_estimators(a, st);
  EXPECT_NEAR(ind.eps_t[0], 0.03, 1e-15);
  EXPECT_NEAR(ind.eps_t[1], 0.03, 1e-15);

  // Current gradient 0.1 /ft, previous 0.3 /ft: the averaging branch.
  st.saturation = {0.2, 0.3};
  Field2D prev(2, 1);
  prev.values = {0.2, 0.5};
  ind = compute_estimators(a, st, EstimatorInputs{nullptr, nullptr, &prev});
  EXPECT_NEAR(ind.eps_s[0], 0.2, 1e-12);
  // Current larger than previous: kept as is.
  prev.values = {0.2, 0.25};
  ind = compute_estimators(a, st, EstimatorInputs{nullptr, nullptr, &prev});
  EXPECT_NEAR(ind.eps_s[1], 0.1, 1e-12);
}

TEST(FitThresholds, Cases) {
  const std::vector<double> two{0.01, 1.0};
  auto f = fit_thresholds(two);
  EXPECT_FALSE(f.sentinel);
  EXPECT_DOUBLE_EQ(f.mu, -1.0);
  EXPECT_DOUBLE_EQ(f.theta_mean, 0.1);
  EXPECT_DOUBLE_EQ(f.theta_hi, 1.0);

  const std::vector<double> same(7, 0.5);
  f = fit_thresholds(same);
  EXPECT_DOUBLE_EQ(f.theta_mean, 0.5);
  EXPECT_DOUBLE_EQ(f.sigma, 0.0);
  EXPECT_DOUBLE_EQ(f.theta_hi, 0.5);

  const std::vector<double> small{0.001, 0.005, 0.0, 0.0099};
  f = fit_thresholds(small);
  EXPECT_TRUE(f.sentinel);
  EXPECT_EQ(f.theta_mean, 1.0);
  EXPECT_TRUE(fit_thresholds(std::vector<double>{0.3}).sentinel);

  const std::vector<double> mixed{0.002, 0.02, 0.2, 1.0, 0.05};
  f = fit_thresholds(mixed);
  EXPECT_EQ(f.count, 4);
  EXPECT_GE(f.theta_mean, 0.01);
  EXPECT_LE(f.theta_mean, 1.0);
  EXPECT_GE(f.theta_hi, f.theta_mean);
}

TEST(MarkTemporal, NeedsBothIndicators) {
  auto m = build_coarse(fixtures::grid(4, 1), MeshLevels{0, 1, 2});
  const std::vector<double> eta{1.0, 1.0, 0.05, 0.02};
  // Element 0: large flux estimator from the pressure gradient alone.
  const std::vector<double> eps{0.0, 1.0, 1.0, 0.03};
  const auto ff = fit_thresholds(eta), fe = fit_thresholds(eps);
  const auto marks = mark_temporal(m, eta, eps, ff, fe);
  EXPECT_EQ(marks, std::vector<int>{1});
  EXPECT_TRUE(mark_temporal(m, std::vector<double>(4, 0.0), std::vector<double>(4, 0.0), fit_thresholds(std::vector<double>(4, 0.0)),
                            fit_thresholds(std::vector<double>(4, 0.0)))
                  .empty());
  // Raising an indicator never unmarks.
  auto eps2 = eps;
  eps2[1] = 1.5;
  EXPECT_EQ(mark_temporal(m, eta, eps2, ff, fe), std::vector<int>{1});
  // Nothing is marked once the temporal cap is reached.
  auto r = refine_temporal(m, std::vector<int>{0, 1, 2, 3});
  const std::vector<double> ones(r.num_elements(), 1.0);
  const ThresholdFit low{-1, 0, 0.1, 0.1, 2, false};
  EXPECT_TRUE(mark_temporal(r, ones, ones, low, low).empty());
}

TEST(MarkSpatial, OrSemanticsAndWells) {
  auto m = build_coarse(fixtures::grid(4, 1), MeshLevels{1, 0, 2});
  const ThresholdFit fe{-1, 0, 0.1, 0.1, 2, false};
  const ThresholdFit ff{-1, 0.5, 0.1, 0.3, 2, false};
  const std::vector<double> eps{0.5, 0.05, 0.05, 0.05};
  const std::vector<double> eta{0.05, 0.2, 0.5, 0.05};
  // eps above its log-mean, or eta above one deviation over its log-mean.
  EXPECT_EQ(mark_spatial(m, eta, eps, ff, fe, {}), (std::vector<int>{0, 2}));
  const std::vector<int> well{3};
  EXPECT_EQ(mark_spatial(m, eta, eps, ff, fe, well), (std::vector<int>{0, 2, 3}));
  auto r = refine_spatial(m, std::vector<int>{3});
  const std::vector<double> z(r.num_elements(), 0.0);
  // Children of the well cell are at the cap: only the coarse ones could be marked.
  for (int e : mark_spatial(r, z, z, ff, fe, std::vector<int>{r.column_at_finest(7, 0)})) EXPECT_EQ(r.elements()[e].level_s, 0);
}
