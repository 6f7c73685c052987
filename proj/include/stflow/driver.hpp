#pragma once

// Sequential local refinement per coarse step: solve on the coarsest mesh,
// add one temporal level per pass up to the temporal cap, freeze time, then
// add one spatial level per pass up to the spatial cap. Every refined mesh is
// smoothed to 2:1 and warm-started from the previous pass. The end-time
// solution goes to the finest-grid history and to the coarse initial guess of
// the next step.

#include <algorithm>
#include <chrono>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "stflow/assembly.hpp"
#include "stflow/estimators.hpp"
#include "stflow/mesh.hpp"
#include "stflow/newton.hpp"
#include "stflow/state.hpp"

namespace stflow {

enum class RunMode { Adaptive, Fine, Coarse };

inline RunMode parse_run_mode(const std::string& s) {
  if (s == "adaptive") return RunMode::Adaptive;
  if (s == "fine") return RunMode::Fine;
  if (s == "coarse") return RunMode::Coarse;
  throw ConfigError("unknown mode '" + s + "' (adaptive, fine, coarse)");
}

inline std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::Adaptive: return "adaptive";
    case RunMode::Fine: return "fine";
    case RunMode::Coarse: return "coarse";
  }
  return "?";
}

struct AdaptivityConfig {
  bool mark_all = false;         // refine everything: the run ends on the uniform finest mesh
  bool warm_start = true;        // false: every pass starts from the previous step's coarse state
  bool residual_region = true;   // coarsest temporal pass also marks the residual region
  bool keep_indicators = false;  // store normalized indicators of every pass

  bool operator==(const AdaptivityConfig&) const = default;
};

struct SimulationSetup {
  CoarseGrid grid;
  MeshLevels levels;
  FluidRockModel model;
  std::vector<WellSpec> wells;
  double initial_pressure = 1000.0;
  double initial_saturation = 0.2;
  int steps = 0;
  RunMode mode = RunMode::Adaptive;
  NewtonConfig newton;
  LinearConfig linear;
  AdaptivityConfig adapt;
  int snapshot_every = 0;  // 0: final step only
};

enum class PassKind { Coarse, Temporal, Spatial, Uniform };

inline std::string to_string(PassKind k) {
  switch (k) {
    case PassKind::Coarse: return "coarse";
    case PassKind::Temporal: return "temporal";
    case PassKind::Spatial: return "spatial";
    case PassKind::Uniform: return "uniform";
  }
  return "?";
}

struct PassRecord {
  PassKind kind = PassKind::Coarse;
  std::size_t elements = 0;
  std::size_t faces = 0;
  std::size_t marked = 0;  // elements marked after this pass's solve
  int max_level_s = 0;
  int max_level_t = 0;
  NewtonStats newton;
};

struct StepPlan {
  int step = 0;
  int space_max = 0;
  int time_max = 0;
  std::vector<PassRecord> passes;
};

/// Newton failure inside a step; carries the passes completed so far.
class StepFailure : public SolverError {
 public:
  StepFailure(const std::string& what, StepPlan plan) : SolverError(what), plan_(std::move(plan)) {}
  const StepPlan& plan() const { return plan_; }

 private:
  StepPlan plan_;
};

struct PassIndicators {
  PassKind kind;
  SpaceTimeMesh mesh;
  IndicatorField normalized;
};

struct StepInput {
  const StepHistory& history;
  const FlowHistory& flow;
  const State& coarse_guess;  // on the coarsest mesh of this step
  int step = 0;
  const State* previous_fine = nullptr;  // fine mode: last step's state on the same mesh
};

struct StepOutcome {
  SpaceTimeMesh mesh;
  State state;
  State coarse_next;
  StepHistory history;
  FlowHistory flow;
  StepPlan plan;
  std::vector<WellTotals> wells;
  double setup_seconds = 0;
  double solve_seconds = 0;
  double total_seconds = 0;
  std::vector<PassIndicators> indicators;
};

namespace detail {

/// Initial guess on a mesh of the same layout as the previous step's: every
/// slice takes the previous end-time cell values, fluxes are copied.
inline State carry_forward(const SpaceTimeMesh& mesh, const State& prev) {
  if (!prev.conforms_to(mesh)) throw MeshError("carry_forward: previous state does not match the mesh");
  State st = prev;
  for (std::size_t c = 0; c < mesh.columns().size(); ++c) {
    const auto& col = mesh.columns()[c];
    const int last = mesh.last_element(static_cast<int>(c));
    for (int k = 0; k < col.slices; ++k) {
      st.pressure[col.first_element + k] = prev.pressure[last];
      st.saturation[col.first_element + k] = prev.saturation[last];
    }
  }
  return st;
}

/// Start-of-step cell values with zero fluxes.
inline State start_guess(const SpaceTimeMesh& mesh, const StepHistory& h) {
  const auto cs = column_start(mesh, h);
  State st = uniform_state(mesh, 0, 0);
  for (const auto& el : mesh.elements()) {
    st.pressure[el.id] = cs[el.column].pressure;
    st.saturation[el.id] = cs[el.column].saturation;
  }
  return st;
}

inline std::vector<int> well_columns(const SpaceTimeMesh& mesh, std::span<const WellSpec> wells) {
  std::vector<int> out;
  for (const auto& w : wells) out.push_back(mesh.column_at_finest(w.i, w.j));
  return out;
}

inline std::vector<int> all_below(const SpaceTimeMesh& mesh, bool temporal) {
  std::vector<int> out;
  for (const auto& el : mesh.elements())
    if (temporal ? el.level_t < mesh.levels().time_max : el.level_s < mesh.levels().space_max) out.push_back(el.id);
  return out;
}

inline std::vector<int> merge(std::vector<int> a, const std::vector<int>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

}  // namespace detail

inline StepOutcome advance_step(const SimulationSetup& setup, const StepInput& in) {
  const auto t_step = detail::Clock::now();
  CoarseGrid grid = setup.grid;
  grid.step = in.step;
  const auto& lv = setup.levels;
  const auto& model = setup.model;

  StepPlan plan{in.step, lv.space_max, lv.time_max, {}};
  StepOutcome out{build_coarse(grid, lv), {}, {}, {}, {}, {}, {}, 0, 0, 0, {}};
  const SpaceTimeMesh coarse = out.mesh;

  auto solve = [&](const SpaceTimeMesh& mesh, State guess, PassKind kind, const StepHistory& hist) {
    Assembler a(mesh, model, setup.wells, column_start(mesh, hist));
    PassRecord rec;
    rec.kind = kind;
    rec.elements = mesh.num_elements();
    rec.faces = mesh.num_interior_subfaces();
    rec.max_level_s = mesh.max_level_s();
    rec.max_level_t = mesh.max_level_t();
    try {
      auto res = newton_solve(a, std::move(guess), setup.newton, setup.linear);
      rec.newton = res.stats;
      out.setup_seconds += res.stats.setup_seconds;
      out.solve_seconds += res.stats.solve_seconds;
      plan.passes.push_back(rec);
      return std::move(res.state);
    } catch (const NewtonFailure& f) {
      rec.newton = f.stats();
      plan.passes.push_back(rec);
      throw StepFailure("step " + std::to_string(in.step) + ", " + to_string(kind) + " pass " +
                            std::to_string(plan.passes.size()) + ": " + f.what(),
                        plan);
    }
  };

  SpaceTimeMesh mesh = coarse;
  State sol;
  if (setup.mode == RunMode::Fine) {
    // Plain fine-scale simulator: the finest grid marched with the finest
    // time step, 2^Lt sub-steps per coarse step.
    const int sub = 1 << lv.time_max;
    CoarseGrid fg = grid;
    fg.dt = grid.dt / sub;
    StepHistory hist = in.history;
    std::vector<WellTotals> wells(setup.wells.size());
    const State* prev = in.previous_fine;
    for (int k = 0; k < sub; ++k) {
      fg.step = in.step * sub + k;
      SpaceTimeMesh fm = uniform_mesh(fg, lv, lv.space_max, 0);
      State guess = prev && prev->conforms_to(fm) ? detail::carry_forward(fm, *prev) : detail::start_guess(fm, hist);
      sol = solve(fm, std::move(guess), PassKind::Uniform, hist);
      Assembler a(fm, model, setup.wells, column_start(fm, hist));
      const auto wt = a.well_totals(sol);
      for (std::size_t w = 0; w < wells.size(); ++w) {
        wells[w].oil += wt[w].oil;
        wells[w].water += wt[w].water;
      }
      hist = history_from_state(fm, sol, model);
      mesh = std::move(fm);
      prev = &sol;
    }
    out.wells = std::move(wells);
    out.history = std::move(hist);
    out.coarse_next = restrict_to_coarse(mesh, sol, coarse, model);
    out.mesh = std::move(mesh);
    out.state = std::move(sol);
    out.plan = std::move(plan);
    out.total_seconds = detail::seconds_since(t_step);
    return out;
  } else {
    State guess = in.coarse_guess;
    sol = solve(mesh, guess, PassKind::Coarse, in.history);
    if (setup.mode == RunMode::Adaptive) {
      const auto& ad = setup.adapt;
      auto estimate = [&](const SpaceTimeMesh& m, const State& s, const State& g, PassKind kind) {
        Assembler a(m, model, setup.wells, column_start(m, in.history));
        EstimatorInputs ei{&g, &in.flow, &in.history.saturation};
        auto ind = normalized(compute_estimators(a, s, ei));
        if (ad.keep_indicators) out.indicators.push_back({kind, m, ind});
        return ind;
      };
      auto next_guess = [&](const SpaceTimeMesh& old_mesh, const State& old_sol, const SpaceTimeMesh& new_mesh) {
        return ad.warm_start ? project_state(old_mesh, old_sol, new_mesh)
                             : project_state(coarse, in.coarse_guess, new_mesh);
      };

      bool first = true;
      PassKind last_kind = PassKind::Coarse;
      for (int lt = 0; lt < lv.time_max; ++lt) {
        std::vector<int> marks;
        const auto ind = estimate(mesh, sol, guess, last_kind);
        if (ad.mark_all) {
          marks = detail::all_below(mesh, true);
        } else {
          const auto tf = phase_max(ind.eta_tf);
          marks = mark_temporal(mesh, tf, ind.eps_t, fit_thresholds(tf), fit_thresholds(ind.eps_t));
          if (first && ad.residual_region) {
            const auto tr = phase_max(ind.eta_tr);
            marks = detail::merge(std::move(marks), mark_above(mesh, tr, fit_thresholds(tr), true));
          }
        }
        plan.passes.back().marked = marks.size();
        first = false;
        if (marks.empty()) break;
        SpaceTimeMesh next = smooth(refine_temporal(mesh, marks));
        guess = next_guess(mesh, sol, next);
        sol = solve(next, guess, PassKind::Temporal, in.history);
        mesh = std::move(next);
        last_kind = PassKind::Temporal;
      }
      for (int ls = 0; ls < lv.space_max; ++ls) {
        std::vector<int> marks;
        const auto ind = estimate(mesh, sol, guess, last_kind);
        if (ad.mark_all) {
          marks = detail::all_below(mesh, false);
        } else {
          const auto sf = phase_max(ind.eta_sf);
          marks = mark_spatial(mesh, sf, ind.eps_s, fit_thresholds(sf), fit_thresholds(ind.eps_s),
                               detail::well_columns(mesh, setup.wells));
        }
        plan.passes.back().marked = marks.size();
        if (marks.empty()) break;
        SpaceTimeMesh next = smooth(refine_spatial(mesh, marks));
        guess = next_guess(mesh, sol, next);
        sol = solve(next, guess, PassKind::Spatial, in.history);
        mesh = std::move(next);
        last_kind = PassKind::Spatial;
      }
      if (ad.keep_indicators) estimate(mesh, sol, guess, last_kind);
    }
  }

  Assembler a(mesh, model, setup.wells, column_start(mesh, in.history));
  out.wells = a.well_totals(sol);
  out.history = history_from_state(mesh, sol, model);
  out.flow = flow_history(a, sol);
  out.coarse_next = restrict_to_coarse(mesh, sol, coarse, model);
  out.mesh = std::move(mesh);
  out.state = std::move(sol);
  out.plan = std::move(plan);
  out.total_seconds = detail::seconds_since(t_step);
  return out;
}

/// Producer rates are step averages in reference-density volumes; the
/// cumulatives are their running integral.
struct RateRow {
  double time_days = 0;
  double qo_ft3_day = 0;
  double qw_ft3_day = 0;
  double cum_oil_ft3 = 0;
  double cum_water_ft3 = 0;
};

struct RunReport {
  RunMode mode = RunMode::Adaptive;
  int steps = 0;
  double setup_seconds = 0;  // Jacobian and residual assembly, condensation
  double linear_seconds = 0;
  double data_seconds = 0;  // estimators, mesh handling, transfers
  double total_seconds = 0;
  int newton_iterations = 0;
  int linear_iterations = 0;
  int passes = 0;
  double element_passes = 0;  // elements summed over all passes
  std::vector<std::size_t> final_elements;  // per step
  double injected_water_ft3 = 0;
  double mass_balance_oil = 0;  // (initial + injected - produced - final) / injected mass
  double mass_balance_water = 0;
};

struct Snapshot {
  int step = 0;
  double time_days = 0;
  SpaceTimeMesh mesh;
  State state;
};

struct SimulationResult {
  std::vector<RateRow> rates;
  RunReport report;
  std::vector<StepPlan> plans;
  std::vector<Snapshot> snapshots;
  std::vector<std::vector<PassIndicators>> indicators;  // per step, when kept
  StepHistory final_history;
};

inline double total(const Field2D& f) { return std::accumulate(f.values.begin(), f.values.end(), 0.0); }

inline SimulationResult run_simulation(const SimulationSetup& setup) {
  const auto t0 = detail::Clock::now();
  if (setup.steps < 0) throw ConfigError("steps must be non-negative");
  setup.newton.validate();
  setup.linear.validate();
  SimulationResult res;
  auto& rep = res.report;
  rep.mode = setup.mode;

  StepHistory hist =
      initial_history(setup.grid, setup.levels, setup.model, setup.initial_pressure, setup.initial_saturation);
  const double m0_oil = total(hist.mass_oil), m0_water = total(hist.mass_water);
  FlowHistory flow;
  State coarse_guess =
      uniform_state(build_coarse(setup.grid, setup.levels), setup.initial_pressure, setup.initial_saturation);
  std::optional<State> prev_fine;
  const double rho_o = setup.model.fluid.oil.rho_ref, rho_w = setup.model.fluid.water.rho_ref;
  double cum_o = 0, cum_w = 0, injected = 0, produced_o = 0, produced_w = 0;

  for (int n = 0; n < setup.steps; ++n) {
    StepInput in{hist, flow, coarse_guess, n, prev_fine ? &*prev_fine : nullptr};
    auto step = advance_step(setup, in);
    double po = 0, pw = 0;
    for (std::size_t w = 0; w < step.wells.size(); ++w) {
      if (setup.wells[w].kind == WellKind::RateInjector) {
        injected -= step.wells[w].water;
        continue;
      }
      po += step.wells[w].oil;
      pw += step.wells[w].water;
    }
    produced_o += po;
    produced_w += pw;
    const double dt = setup.grid.dt;
    RateRow row;
    row.time_days = (n + 1) * dt;
    row.qo_ft3_day = po / rho_o / dt;
    row.qw_ft3_day = pw / rho_w / dt;
    cum_o += row.qo_ft3_day * dt;
    cum_w += row.qw_ft3_day * dt;
    row.cum_oil_ft3 = cum_o;
    row.cum_water_ft3 = cum_w;
    res.rates.push_back(row);

    for (const auto& p : step.plan.passes) {
      rep.newton_iterations += p.newton.iterations;
      rep.linear_iterations += p.newton.linear_iterations;
      rep.element_passes += static_cast<double>(p.elements);
      ++rep.passes;
    }
    rep.setup_seconds += step.setup_seconds;
    rep.linear_seconds += step.solve_seconds;
    rep.final_elements.push_back(step.mesh.num_elements());
    ++rep.steps;

    const bool last = n + 1 == setup.steps;
    if (last || (setup.snapshot_every > 0 && (n + 1) % setup.snapshot_every == 0))
      res.snapshots.push_back({n, row.time_days, step.mesh, step.state});
    if (setup.adapt.keep_indicators) res.indicators.push_back(std::move(step.indicators));
    res.plans.push_back(std::move(step.plan));

    hist = std::move(step.history);
    flow = std::move(step.flow);
    coarse_guess = std::move(step.coarse_next);
    if (setup.mode == RunMode::Fine) prev_fine = std::move(step.state);
  }

  rep.injected_water_ft3 = injected / rho_w;
  if (injected > 0) {
    rep.mass_balance_oil = (m0_oil - produced_o - total(hist.mass_oil)) / injected;
    rep.mass_balance_water = (m0_water + injected - produced_w - total(hist.mass_water)) / injected;
  }
  res.final_history = std::move(hist);
  rep.total_seconds = detail::seconds_since(t0);
  rep.data_seconds = std::max(0.0, rep.total_seconds - rep.setup_seconds - rep.linear_seconds);
  return res;
}

}  // namespace stflow
