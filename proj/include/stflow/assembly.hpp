#pragma once

// Fully implicit residual and Jacobian of the space-time enhanced velocity
// system on one coarse step.
//
// Unknowns: per element (P_o, S_w); per interior sub-face and phase the
// auxiliary flux U~ (ft^3/day per unit mobility). Rows:
//
//   total mass   sum_a [M_a(end) - M_a(start) + sum_f +-lambda*_a U~_a,f |f|_t - Q_a]
//   water mass   same for water only
//   flux (a, f)  U~_a,f - T_f (Phi_a,minus - Phi_a,plus)
//
// M(start) of the first slice of a column is the column's start-of-step mass;
// later slices use the previous slice, which couples each element to the one
// below it in time. A coarse-time element accumulates every fine-time flux on
// its sides, so flux continuity across non-matching interfaces is exact.
// Mass rows are scaled by 1 / (phi V rho_w,ref), flux rows by 1 / T_f.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "stflow/error.hpp"
#include "stflow/mesh.hpp"
#include "stflow/physics.hpp"
#include "stflow/state.hpp"

namespace stflow {

struct DofMap {
  int elements = 0;
  int faces = 0;  // interior sub-faces

  explicit DofMap(const SpaceTimeMesh& mesh)
      : elements(static_cast<int>(mesh.num_elements())), faces(static_cast<int>(mesh.num_interior_subfaces())) {}

  int size() const { return 2 * elements + 2 * faces; }
  int cell_dofs() const { return 2 * elements; }
  int pressure(int e) const { return 2 * e; }
  int saturation(int e) const { return 2 * e + 1; }
  int flux(int f, Phase ph) const { return 2 * elements + 2 * f + index(ph); }

  Eigen::VectorXd pack(const State& st) const {
    check(st);
    Eigen::VectorXd x(size());
    for (int e = 0; e < elements; ++e) {
      x[pressure(e)] = st.pressure[e];
      x[saturation(e)] = st.saturation[e];
    }
    for (int f = 0; f < faces; ++f)
      for (Phase ph : kPhases) x[flux(f, ph)] = st.flux(ph)[f];
    return x;
  }

  State unpack(const Eigen::VectorXd& x) const {
    if (x.size() != size()) throw MeshError("DofMap: vector size does not match");
    State st;
    st.pressure.resize(elements);
    st.saturation.resize(elements);
    st.flux_oil.resize(faces);
    st.flux_water.resize(faces);
    for (int e = 0; e < elements; ++e) {
      st.pressure[e] = x[pressure(e)];
      st.saturation[e] = x[saturation(e)];
    }
    for (int f = 0; f < faces; ++f)
      for (Phase ph : kPhases) st.flux(ph)[f] = x[flux(f, ph)];
    return st;
  }

  void check(const State& st) const {
    if (static_cast<int>(st.pressure.size()) != elements || static_cast<int>(st.saturation.size()) != elements ||
        static_cast<int>(st.flux_oil.size()) != faces || static_cast<int>(st.flux_water.size()) != faces)
      throw MeshError("state does not match the dof map");
  }
};

struct SparseSystem {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd rhs;
  int size() const { return static_cast<int>(rhs.size()); }
};

enum class WellKind { RateInjector, BhpProducer };

struct WellSpec {
  WellKind kind = WellKind::RateInjector;
  int i = 0;  // finest-level cell
  int j = 0;
  double value = 0;     // ft^3/day water (injector) or psi (producer)
  double radius = 0.1;  // ft

  void validate(int finest_nx, int finest_ny) const {
    if (i < 0 || j < 0 || i >= finest_nx || j >= finest_ny) throw ConfigError("well location outside the grid");
    if (kind == WellKind::RateInjector && !(value >= 0)) throw ConfigError("injector rate must be non-negative");
    if (kind == WellKind::BhpProducer && !(value > 0)) throw ConfigError("producer BHP must be positive");
    if (!(radius > 0)) throw ConfigError("well radius must be positive");
  }

  bool operator==(const WellSpec&) const = default;
};

/// Well mass exchange over one coarse step, lb (positive = leaving the reservoir).
struct WellTotals {
  double oil = 0;
  double water = 0;
};

/// Per-sub-face actual and upwind phase fluxes, U = lambda U~ and U_up = lambda* U~.
struct PhaseFluxes {
  std::vector<double> actual;
  std::vector<double> upwind;
};

class Assembler {
 public:
  Assembler(const SpaceTimeMesh& mesh, const FluidRockModel& model, std::span<const WellSpec> wells,
            std::vector<ColumnStart> start)
      : mesh_(mesh), model_(model), wells_(wells.begin(), wells.end()), start_(std::move(start)), dofs_(mesh) {
    if (start_.size() != mesh.columns().size()) throw MeshError("start data does not match the mesh columns");
    const auto ne = mesh.num_elements();
    rock_.resize(ne);
    mass_scale_.resize(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      rock_[e] = cell_rock(model.rock, mesh.elements()[e]);
      mass_scale_[e] = 1.0 / (rock_[e].phi * mesh.elements()[e].volume * model.fluid.water.rho_ref);
    }
    const auto nf = mesh.num_interior_subfaces();
    trans_.resize(nf);
    gravity_head_.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) {
      const auto& sf = mesh.subfaces()[f];
      const auto& a = mesh.elements()[sf.minus];
      const auto& b = mesh.elements()[sf.plus];
      const bool x = sf.orientation == Orientation::X;
      const double ka = x ? rock_[sf.minus].kx : rock_[sf.minus].ky;
      const double kb = x ? rock_[sf.plus].kx : rock_[sf.plus].ky;
      const double da = 0.5 * (x ? a.dx() : a.dy());
      const double db = 0.5 * (x ? b.dx() : b.dy());
      const double area = (sf.s1 - sf.s0) * mesh.grid().thickness;
      trans_[f] = model.darcy_constant * area / (da / ka + db / kb);
      const auto& g = model.fluid.gravity;
      gravity_head_[f] = (g[0] * (b.xc() - a.xc()) + g[1] * (b.yc() - a.yc())) * kGravityToPsi;
    }
    for (const auto& w : wells_) {
      w.validate(mesh.finest_nx(), mesh.finest_ny());
      const int c = mesh.column_at_finest(w.i, w.j);
      const auto& el = mesh.elements()[mesh.columns()[c].first_element];
      const auto r = rock_[el.id];
      const double req = 0.14 * std::sqrt(el.dx() * el.dx() + el.dy() * el.dy());
      if (!(req > w.radius))
        throw ConfigError("well radius " + std::to_string(w.radius) + " ft is not below the equivalent radius " +
                          std::to_string(req) + " ft of its cell");
      const double k = std::sqrt(r.kx * r.ky);
      if (w.kind == WellKind::BhpProducer && !(k > 0)) throw ConfigError("producer in a zero-permeability cell");
      well_column_.push_back(c);
      well_index_.push_back(model.darcy_constant * 2.0 * std::numbers::pi * k * mesh.grid().thickness /
                            std::log(req / w.radius));
    }
  }

  const SpaceTimeMesh& mesh() const { return mesh_; }
  const FluidRockModel& model() const { return model_; }
  const DofMap& dofs() const { return dofs_; }
  const std::vector<ColumnStart>& start() const { return start_; }
  const CellRock& rock(int e) const { return rock_[e]; }
  double transmissibility(int f) const { return trans_[f]; }
  double mass_scale(int e) const { return mass_scale_[e]; }
  double well_index(std::size_t w) const { return well_index_[w]; }
  int well_column(std::size_t w) const { return well_column_[w]; }
  std::span<const WellSpec> wells() const { return wells_; }

  Eigen::VectorXd residual(const State& st) const {
    Eigen::VectorXd r;
    evaluate(st, r, nullptr);
    return r;
  }

  /// Jacobian and right-hand side -r at the given iterate.
  SparseSystem jacobian(const State& st) const {
    SparseSystem sys;
    std::vector<Eigen::Triplet<double>> trip;
    evaluate(st, sys.rhs, &trip);
    sys.rhs = -sys.rhs;
    sys.matrix.resize(dofs_.size(), dofs_.size());
    sys.matrix.setFromTriplets(trip.begin(), trip.end());
    return sys;
  }

  /// Mass of each phase in element e at its end time, lb.
  MassDensity element_mass(const State& st, int e) const {
    const auto md = mass_density(model_, rock_[e].phi, st.pressure[e], st.saturation[e]);
    const double v = mesh_.elements()[e].volume;
    return {md.oil * v, md.water * v};
  }

  /// Phase mass leaving through each well over the step (injectors negative water).
  std::vector<WellTotals> well_totals(const State& st) const {
    std::vector<WellTotals> out(wells_.size());
    for (std::size_t w = 0; w < wells_.size(); ++w) {
      const auto& col = mesh_.columns()[well_column_[w]];
      for (int k = 0; k < col.slices; ++k) {
        const int e = col.first_element + k;
        const double dur = mesh_.elements()[e].duration;
        if (wells_[w].kind == WellKind::RateInjector) {
          out[w].water -= model_.fluid.water.rho_ref * wells_[w].value * dur;
        } else {
          const double dp = st.pressure[e] - wells_[w].value;
          for (Phase ph : kPhases) {
            const double q = well_index_[w] * mobility(model_, ph, st.pressure[e], st.saturation[e]).value * dp * dur;
            (ph == Phase::Oil ? out[w].oil : out[w].water) += q;
          }
        }
      }
    }
    return out;
  }

  PhaseFluxes phase_fluxes(const State& st, Phase ph) const {
    dofs_.check(st);
    PhaseFluxes out;
    const auto nf = mesh_.num_interior_subfaces();
    out.actual.resize(nf);
    out.upwind.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) {
      const auto& sf = mesh_.subfaces()[f];
      const double u = st.flux(ph)[f];
      const double lc = centered_mobility(model_, ph, st.pressure[sf.minus], st.saturation[sf.minus],
                                          st.pressure[sf.plus], st.saturation[sf.plus]);
      const auto lu = upwind_mobility(model_, ph, u, st.pressure[sf.minus], st.saturation[sf.minus],
                                      st.pressure[sf.plus], st.saturation[sf.plus]);
      out.actual[f] = lc * u;
      out.upwind[f] = lu.value * u;
    }
    return out;
  }

 private:
  struct CellEval {
    PhaseDensity rho[2];
    ValueDeriv pc;
    Mobility lambda[2];
  };

  void evaluate(const State& st, Eigen::VectorXd& r, std::vector<Eigen::Triplet<double>>* jac) const;

  const SpaceTimeMesh& mesh_;
  const FluidRockModel& model_;
  std::vector<WellSpec> wells_;
  std::vector<ColumnStart> start_;
  DofMap dofs_;
  std::vector<CellRock> rock_;
  std::vector<double> mass_scale_;
  std::vector<double> trans_;
  std::vector<double> gravity_head_;
  std::vector<int> well_column_;
  std::vector<double> well_index_;
};

inline void Assembler::evaluate(const State& st, Eigen::VectorXd& r,
                                std::vector<Eigen::Triplet<double>>* jac) const {
  dofs_.check(st);
  const auto& els = mesh_.elements();
  const int ne = dofs_.elements, nf = dofs_.faces;
  for (int e = 0; e < ne; ++e)
    if (!std::isfinite(st.pressure[e]) || !std::isfinite(st.saturation[e]))
      throw SolverError("non-finite cell value in state");
  r.setZero(dofs_.size());
  if (jac) {
    jac->clear();
    jac->reserve(static_cast<std::size_t>(ne) * 12 + static_cast<std::size_t>(nf) * 24);
  }
  auto add = [&](int row, int col, double v) {
    if (jac && v != 0.0) jac->emplace_back(row, col, v);
  };

  std::vector<CellEval> cell(static_cast<std::size_t>(ne));
  for (int e = 0; e < ne; ++e) {
    auto& c = cell[e];
    const double p = st.pressure[e], s = st.saturation[e];
    for (Phase ph : kPhases) {
      c.rho[index(ph)] = phase_density(model_, ph, p, s);
      c.lambda[index(ph)] = mobility(model_, ph, p, s);
    }
    c.pc = capillary_pressure(model_.relperm, s);
  }

  // Accumulation. Row 2e: total mass, row 2e+1: water mass.
  for (int e = 0; e < ne; ++e) {
    const double pv = rock_[e].phi * els[e].volume;
    const double sc = mass_scale_[e];
    const double s = st.saturation[e];
    const auto& c = cell[e];
    const double mo = pv * c.rho[0].value * (1 - s), mw = pv * c.rho[1].value * s;
    const double mo_p = pv * c.rho[0].d_p * (1 - s), mo_s = pv * (c.rho[0].d_s * (1 - s) - c.rho[0].value);
    const double mw_p = pv * c.rho[1].d_p * s, mw_s = pv * (c.rho[1].d_s * s + c.rho[1].value);
    const int rt = dofs_.pressure(e), rw = dofs_.saturation(e);
    r[rt] += sc * (mo + mw);
    r[rw] += sc * mw;
    add(rt, dofs_.pressure(e), sc * (mo_p + mw_p));
    add(rt, dofs_.saturation(e), sc * (mo_s + mw_s));
    add(rw, dofs_.pressure(e), sc * mw_p);
    add(rw, dofs_.saturation(e), sc * mw_s);

    if (els[e].k == 0) {
      const auto& cs = start_[els[e].column];
      r[rt] -= sc * (cs.mass_oil + cs.mass_water);
      r[rw] -= sc * cs.mass_water;
    } else {
      const int q = e - 1;  // previous slice of the same column
      const double pq = rock_[q].phi * els[q].volume;
      const double sq = st.saturation[q];
      const auto& cq = cell[q];
      const double qo = pq * cq.rho[0].value * (1 - sq), qw = pq * cq.rho[1].value * sq;
      r[rt] -= sc * (qo + qw);
      r[rw] -= sc * qw;
      const double qo_p = pq * cq.rho[0].d_p * (1 - sq), qo_s = pq * (cq.rho[0].d_s * (1 - sq) - cq.rho[0].value);
      const double qw_p = pq * cq.rho[1].d_p * sq, qw_s = pq * (cq.rho[1].d_s * sq + cq.rho[1].value);
      add(rt, dofs_.pressure(q), -sc * (qo_p + qw_p));
      add(rt, dofs_.saturation(q), -sc * (qo_s + qw_s));
      add(rw, dofs_.pressure(q), -sc * qw_p);
      add(rw, dofs_.saturation(q), -sc * qw_s);
    }
  }

  // Interface fluxes: mass rows of both sides and the constitutive rows.
  for (int f = 0; f < nf; ++f) {
    const auto& sf = mesh_.subfaces()[f];
    const int a = sf.minus, b = sf.plus;
    const double dur = sf.t1 - sf.t0;
    const double T = trans_[f];
    for (Phase ph : kPhases) {
      const int k = index(ph);
      const int fd = dofs_.flux(f, ph);
      const double u = st.flux(ph)[f];
      const auto up = upwind_mobility(model_, ph, u, st.pressure[a], st.saturation[a], st.pressure[b],
                                      st.saturation[b]);
      const double flow = up.value * u * dur;
      for (int side = 0; side < 2; ++side) {
        const int e = side == 0 ? a : b;
        const double sgn = side == 0 ? 1.0 : -1.0;
        const double sc = mass_scale_[e] * sgn;
        const int rt = dofs_.pressure(e), rw = dofs_.saturation(e);
        r[rt] += sc * flow;
        if (ph == Phase::Water) r[rw] += sc * flow;
        if (jac) {
          const double g[5] = {up.value * dur, up.d_p_minus * u * dur, up.d_s_minus * u * dur,
                               up.d_p_plus * u * dur, up.d_s_plus * u * dur};
          const int cols[5] = {fd, dofs_.pressure(a), dofs_.saturation(a), dofs_.pressure(b), dofs_.saturation(b)};
          for (int i = 0; i < 5; ++i) {
            add(rt, cols[i], sc * g[i]);
            if (ph == Phase::Water) add(rw, cols[i], sc * g[i]);
          }
        }
      }

      // Constitutive row (scaled by 1/T): U~/T - (Phi_a - Phi_b).
      double dphi = st.pressure[a] - st.pressure[b];
      double dphi_sa = 0, dphi_sb = 0;
      if (ph == Phase::Water) {
        dphi -= cell[a].pc.value - cell[b].pc.value;
        dphi_sa = -cell[a].pc.deriv;
        dphi_sb = cell[b].pc.deriv;
      }
      const double G = gravity_head_[f];
      double dphi_pa = 1, dphi_pb = -1;
      if (G != 0.0) {
        const auto& ra = cell[a].rho[k];
        const auto& rb = cell[b].rho[k];
        dphi += 0.5 * (ra.value + rb.value) * G;
        dphi_pa += 0.5 * ra.d_p * G;
        dphi_pb += 0.5 * rb.d_p * G;
        dphi_sa += 0.5 * ra.d_s * G;
        dphi_sb += 0.5 * rb.d_s * G;
      }
      r[fd] = u / T - dphi;
      add(fd, fd, 1.0 / T);
      add(fd, dofs_.pressure(a), -dphi_pa);
      add(fd, dofs_.pressure(b), -dphi_pb);
      add(fd, dofs_.saturation(a), -dphi_sa);
      add(fd, dofs_.saturation(b), -dphi_sb);
    }
  }

  // Wells.
  for (std::size_t w = 0; w < wells_.size(); ++w) {
    const auto& col = mesh_.columns()[well_column_[w]];
    for (int k = 0; k < col.slices; ++k) {
      const int e = col.first_element + k;
      const double dur = els[e].duration;
      const double sc = mass_scale_[e];
      const int rt = dofs_.pressure(e), rw = dofs_.saturation(e);
      if (wells_[w].kind == WellKind::RateInjector) {
        const double m = model_.fluid.water.rho_ref * wells_[w].value * dur;
        r[rt] -= sc * m;
        r[rw] -= sc * m;
        continue;
      }
      const double dp = st.pressure[e] - wells_[w].value;
      const double wi = well_index_[w] * dur;
      for (Phase ph : kPhases) {
        const auto& lam = cell[e].lambda[index(ph)];
        const double q = wi * lam.value * dp;
        const double q_p = wi * (lam.d_p * dp + lam.value), q_s = wi * lam.d_s * dp;
        r[rt] += sc * q;
        add(rt, dofs_.pressure(e), sc * q_p);
        add(rt, dofs_.saturation(e), sc * q_s);
        if (ph == Phase::Water) {
          r[rw] += sc * q;
          add(rw, dofs_.pressure(e), sc * q_p);
          add(rw, dofs_.saturation(e), sc * q_s);
        }
      }
    }
  }
}

inline Eigen::VectorXd assemble_residual(const SpaceTimeMesh& mesh, const State& st,
                                         const std::vector<ColumnStart>& start, const FluidRockModel& model,
                                         std::span<const WellSpec> wells) {
  return Assembler(mesh, model, wells, start).residual(st);
}

inline SparseSystem assemble_jacobian(const SpaceTimeMesh& mesh, const State& st,
                                      const std::vector<ColumnStart>& start, const FluidRockModel& model,
                                      std::span<const WellSpec> wells) {
  return Assembler(mesh, model, wells, start).jacobian(st);
}

inline PhaseFluxes compute_phase_fluxes(const SpaceTimeMesh& mesh, const State& st, const FluidRockModel& model,
                                        Phase ph) {
  return Assembler(mesh, model, {}, std::vector<ColumnStart>(mesh.columns().size())).phase_fluxes(st, ph);
}

}  // namespace stflow
