#pragma once

// A posteriori estimators, saturation-gradient indicators, distribution
// thresholds and refinement marks.
//
// Cell velocities are the RT0 cell averages: the x component is the mean of
// the flux densities through the left and right sides, each side averaged
// over its sub-faces in space and time. Fluxes are piecewise constant in
// time, so on element (tau_m, tau_m+1] the time interpolant runs linearly from
// the previous slice's value (previous step's end value for the first slice)
// to the element's own value, and
//
//   eta_t,f = { |Omega| K^-1 |u(tau_m+1) - u(tau_m)|^2 dtau / 3 }^1/2.
//
// Residual estimators use the mass residual of the iterate handed in as the
// initial guess of the pass; on a converged state they vanish.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "stflow/assembly.hpp"
#include "stflow/field.hpp"

namespace stflow {

using PhaseValues = std::array<std::vector<double>, 2>;

struct IndicatorField {
  PhaseValues eta_tr, eta_sr;  // residual
  PhaseValues eta_tf, eta_sf;  // flux
  PhaseValues eta_tp, eta_sp;  // nonconformity
  std::vector<double> eps_t;   // |dS/dt|, 1/day
  std::vector<double> eps_s;   // max-norm saturation gradient, 1/ft

  std::size_t size() const { return eps_t.size(); }
};

/// Cell velocity vector per element (x, y).
using CellVectors = std::vector<std::array<double, 2>>;

/// End-of-step cell velocities on the finest grid, per phase: the actual
/// velocity lambda U~ and the auxiliary U~. Empty fields mean a fluid at rest.
struct FlowHistory {
  std::array<std::array<Field2D, 2>, 2> actual;  // [phase][component]
  std::array<std::array<Field2D, 2>, 2> aux;

  bool empty() const { return actual[0][0].size() == 0; }
};

struct ThresholdFit {
  double mu = 0;     // mean of log10 values in the window
  double sigma = 0;  // population standard deviation of the same
  double theta_mean = 1.0;
  double theta_hi = 1.0;
  int count = 0;
  bool sentinel = true;  // fewer than two values in the window: marks nothing
};

/// RT0 cell-average velocity from per-interior-sub-face flux values (rates).
inline CellVectors cell_velocities(const SpaceTimeMesh& mesh, std::span<const double> face_rate) {
  const auto& els = mesh.elements();
  CellVectors v(els.size(), {0.0, 0.0});
  for (const auto& el : els) {
    std::array<double, 2> lo{0, 0}, hi{0, 0};
    for (int f : mesh.faces_of(el.id)) {
      if (static_cast<std::size_t>(f) >= mesh.num_interior_subfaces()) continue;  // no-flow boundary
      const auto& sf = mesh.subfaces()[f];
      const int c = sf.orientation == Orientation::X ? 0 : 1;
      const double side = c == 0 ? el.dy() : el.dx();
      // Flux density weighted by this sub-face's share of the side.
      const double share = face_rate[f] / sf.area() * (sf.s1 - sf.s0) * (sf.t1 - sf.t0) / (side * el.duration);
      (sf.minus == el.id ? hi : lo)[c] += share;
    }
    v[el.id] = {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])};
  }
  return v;
}

/// Closed form of the temporal estimators for a flux that changes by du over
/// dtau; kinv_du2 = K^-1 |du|^2.
inline double temporal_estimator(double omega, double kinv_du2, double dtau) {
  return std::sqrt(omega * kinv_du2 * dtau / 3.0);
}

namespace detail {

inline double k_inv_norm2(const std::array<double, 2>& u, const CellRock& r) {
  return u[0] * u[0] / r.kx + u[1] * u[1] / r.ky;
}

inline std::array<double, 2> footprint_mean(const SpaceTimeMesh& mesh, int column, const std::array<Field2D, 2>& f) {
  const auto fp = mesh.footprint(column);
  std::array<double, 2> s{0, 0};
  double n = 0;
  for (int J = fp[2]; J < fp[3]; ++J)
    for (int I = fp[0]; I < fp[1]; ++I) {
      s[0] += f[0](I, J);
      s[1] += f[1](I, J);
      n += 1;
    }
  return {s[0] / n, s[1] / n};
}

inline double block_mean(const Field2D& f, int I0, int J0, int w) {
  double s = 0;
  for (int J = J0; J < J0 + w; ++J)
    for (int I = I0; I < I0 + w; ++I) s += f(I, J);
  return s / (static_cast<double>(w) * w);
}

/// Max-norm one-sided gradient of a finest-grid field aggregated to the
/// element's block size, at the element's block.
inline double block_gradient(const SpaceTimeMesh& mesh, const Field2D& s, int column) {
  const auto fp = mesh.footprint(column);
  const int w = fp[1] - fp[0];
  const double here = block_mean(s, fp[0], fp[2], w);
  const double hx = w * mesh.finest_dx(), hy = w * mesh.finest_dy();
  double g = 0;
  if (fp[0] - w >= 0) g = std::max(g, std::abs(here - block_mean(s, fp[0] - w, fp[2], w)) / hx);
  if (fp[1] + w <= s.nx) g = std::max(g, std::abs(block_mean(s, fp[1], fp[2], w) - here) / hx);
  if (fp[2] - w >= 0) g = std::max(g, std::abs(here - block_mean(s, fp[0], fp[2] - w, w)) / hy);
  if (fp[3] + w <= s.ny) g = std::max(g, std::abs(block_mean(s, fp[0], fp[3], w) - here) / hy);
  return g;
}

/// Max-norm of the one-sided differences to the neighbours across each side;
/// several facing cells on one side are averaged by sub-face measure.
inline double cell_gradient(const SpaceTimeMesh& mesh, const std::vector<double>& s, int e) {
  const auto& el = mesh.elements()[e];
  std::array<double, 4> sum{0, 0, 0, 0}, wsum{0, 0, 0, 0};
  for (int f : mesh.faces_of(e)) {
    const auto& sf = mesh.subfaces()[f];
    if (sf.boundary()) continue;
    const int o = sf.minus == e ? sf.plus : sf.minus;
    const auto& nb = mesh.elements()[o];
    const bool x = sf.orientation == Orientation::X;
    const double d = x ? std::abs(nb.xc() - el.xc()) : std::abs(nb.yc() - el.yc());
    const int side = (x ? 0 : 2) + (sf.minus == e ? 1 : 0);
    sum[side] += sf.measure * (s[o] - s[e]) / d;
    wsum[side] += sf.measure;
  }
  double g = 0;
  for (int k = 0; k < 4; ++k)
    if (wsum[k] > 0) g = std::max(g, std::abs(sum[k] / wsum[k]));
  return g;
}

}  // namespace detail

/// Finest-grid cell velocities of the end-time slice, the next step's
/// starting point for the temporal flux estimators.
inline FlowHistory flow_history(const Assembler& a, const State& st) {
  const auto& mesh = a.mesh();
  FlowHistory h;
  const int NX = mesh.finest_nx(), NY = mesh.finest_ny();
  for (Phase ph : kPhases) {
    const auto pf = a.phase_fluxes(st, ph);
    const auto u = cell_velocities(mesh, pf.actual);
    const auto w = cell_velocities(mesh, st.flux(ph));
    auto& ua = h.actual[index(ph)];
    auto& ux = h.aux[index(ph)];
    for (int c = 0; c < 2; ++c) {
      ua[c] = Field2D(NX, NY);
      ux[c] = Field2D(NX, NY);
    }
    for (std::size_t col = 0; col < mesh.columns().size(); ++col) {
      const int e = mesh.last_element(static_cast<int>(col));
      const auto fp = mesh.footprint(static_cast<int>(col));
      for (int J = fp[2]; J < fp[3]; ++J)
        for (int I = fp[0]; I < fp[1]; ++I)
          for (int c = 0; c < 2; ++c) {
            ua[c](I, J) = u[e][c];
            ux[c](I, J) = w[e][c];
          }
    }
  }
  return h;
}

struct EstimatorInputs {
  const State* initial_guess = nullptr;          // residual estimators; converged state if null
  const FlowHistory* previous_flow = nullptr;    // fluid at rest if null
  const Field2D* previous_saturation = nullptr;  // finest grid; current gradient only if null
};

/// Raw (unnormalized) estimators and indicators on a converged state.
inline IndicatorField compute_estimators(const Assembler& a, const State& st, const EstimatorInputs& in = {}) {
  const auto& mesh = a.mesh();
  const auto& els = mesh.elements();
  const std::size_t ne = els.size();
  IndicatorField out;
  for (auto* pv : {&out.eta_tr, &out.eta_sr, &out.eta_tf, &out.eta_sf, &out.eta_tp, &out.eta_sp})
    for (auto& v : *pv) v.assign(ne, 0.0);
  out.eps_t.assign(ne, 0.0);
  out.eps_s.assign(ne, 0.0);

  // Residual estimators.
  const Eigen::VectorXd r = a.residual(in.initial_guess ? *in.initial_guess : st);
  for (std::size_t e = 0; e < ne; ++e) {
    const int ei = static_cast<int>(e);
    const double sc = a.mass_scale(ei);
    const double rw = r[a.dofs().saturation(ei)] / sc;
    const double ro = r[a.dofs().pressure(ei)] / sc - rw;
    const double v = els[e].volume, dt = els[e].duration;
    for (Phase ph : kPhases) {
      const double dens = std::abs(ph == Phase::Oil ? ro : rw) / (v * dt);
      const double l2 = dens * std::sqrt(v * dt);
      out.eta_tr[index(ph)][e] = dt * l2;
      out.eta_sr[index(ph)][e] = v * l2;
    }
  }

  // Flux and nonconformity estimators.
  for (Phase ph : kPhases) {
    const int k = index(ph);
    const auto pf = a.phase_fluxes(st, ph);
    const auto u = cell_velocities(mesh, pf.actual);
    const auto uup = cell_velocities(mesh, pf.upwind);
    const auto w = cell_velocities(mesh, st.flux(ph));
    for (std::size_t e = 0; e < ne; ++e) {
      const auto& el = els[e];
      const auto& rock = a.rock(static_cast<int>(e));
      std::array<double, 2> u0{0, 0}, w0{0, 0};
      if (el.k > 0) {
        u0 = u[e - 1];
        w0 = w[e - 1];
      } else if (in.previous_flow && !in.previous_flow->empty()) {
        u0 = detail::footprint_mean(mesh, el.column, in.previous_flow->actual[k]);
        w0 = detail::footprint_mean(mesh, el.column, in.previous_flow->aux[k]);
      }
      const std::array<double, 2> du{u[e][0] - u0[0], u[e][1] - u0[1]};
      const std::array<double, 2> dw{w[e][0] - w0[0], w[e][1] - w0[1]};
      const std::array<double, 2> dup{uup[e][0] - u[e][0], uup[e][1] - u[e][1]};
      out.eta_tf[k][e] = temporal_estimator(el.volume, detail::k_inv_norm2(du, rock), el.duration);
      out.eta_tp[k][e] = temporal_estimator(el.volume, detail::k_inv_norm2(dw, rock), el.duration);
      out.eta_sf[k][e] = std::sqrt(el.volume * el.duration * detail::k_inv_norm2(dup, rock));
    }
    // Tangential jumps of K^-1 U~ across interior sub-faces; the cell curl
    // term vanishes for cell-wise constant K^-1 U~.
    std::vector<double> acc(ne, 0.0);
    for (std::size_t f = 0; f < mesh.num_interior_subfaces(); ++f) {
      const auto& sf = mesh.subfaces()[f];
      const int t = sf.orientation == Orientation::X ? 1 : 0;
      auto tangential = [&](int e) {
        const auto& rock = a.rock(e);
        return w[e][t] / (t == 0 ? rock.kx : rock.ky);
      };
      const double jump = tangential(sf.minus) - tangential(sf.plus);
      const double term = (sf.s1 - sf.s0) * sf.measure * jump * jump;
      acc[sf.minus] += term;
      acc[sf.plus] += term;
    }
    for (std::size_t e = 0; e < ne; ++e) out.eta_sp[k][e] = std::sqrt(acc[e]);
  }

  // Saturation-gradient indicators.
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& el = els[e];
    const double s0 = el.k > 0 ? st.saturation[e - 1] : a.start()[el.column].saturation;
    out.eps_t[e] = std::abs(st.saturation[e] - s0) / el.duration;
    const double cur = detail::cell_gradient(mesh, st.saturation, static_cast<int>(e));
    if (!in.previous_saturation) {
      out.eps_s[e] = cur;
      continue;
    }
    const double prev = detail::block_gradient(mesh, *in.previous_saturation, el.column);
    out.eps_s[e] = cur > prev ? cur : 0.5 * (cur + prev);
  }
  return out;
}

/// Divides each variable (and phase) by its maximum over the mesh.
inline void normalize(std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, x);
  if (m > 0)
    for (double& x : v) x /= m;
}

inline IndicatorField normalized(IndicatorField f) {
  for (auto* pv : {&f.eta_tr, &f.eta_sr, &f.eta_tf, &f.eta_sf, &f.eta_tp, &f.eta_sp})
    for (auto& v : *pv) normalize(v);
  normalize(f.eps_t);
  normalize(f.eps_s);
  return f;
}

/// Per-element maximum over the two phases.
inline std::vector<double> phase_max(const PhaseValues& v) {
  std::vector<double> out(v[0].size());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = std::max(v[0][e], v[1][e]);
  return out;
}

/// Log-normal fit of the normalized values inside [0.01, 1].
inline ThresholdFit fit_thresholds(std::span<const double> values) {
  std::vector<double> logs;
  for (double v : values)
    if (v >= 0.01 && v <= 1.0) logs.push_back(std::log10(v));
  ThresholdFit fit;
  fit.count = static_cast<int>(logs.size());
  if (logs.size() < 2) return fit;
  double mu = 0;
  for (double l : logs) mu += l;
  mu /= static_cast<double>(logs.size());
  double var = 0;
  for (double l : logs) var += (l - mu) * (l - mu);
  var /= static_cast<double>(logs.size());
  fit.mu = mu;
  fit.sigma = std::sqrt(var);
  fit.theta_mean = std::pow(10.0, mu);
  fit.theta_hi = std::pow(10.0, mu + fit.sigma);
  fit.sentinel = false;
  return fit;
}

/// Elements with both the temporal flux estimator and the temporal
/// saturation change above their log-means.
inline std::vector<int> mark_temporal(const SpaceTimeMesh& mesh, std::span<const double> eta_tf,
                                      std::span<const double> eps_t, const ThresholdFit& fit_f,
                                      const ThresholdFit& fit_e) {
  std::vector<int> out;
  if (fit_f.sentinel || fit_e.sentinel) return out;
  for (const auto& el : mesh.elements())
    if (el.level_t < mesh.levels().time_max && eta_tf[el.id] > fit_f.theta_mean && eps_t[el.id] > fit_e.theta_mean)
      out.push_back(el.id);
  return out;
}

/// Elements whose (normalized) value exceeds the log-mean of its own fit.
inline std::vector<int> mark_above(const SpaceTimeMesh& mesh, std::span<const double> v, const ThresholdFit& fit,
                                   bool temporal) {
  std::vector<int> out;
  if (fit.sentinel) return out;
  for (const auto& el : mesh.elements()) {
    const bool room = temporal ? el.level_t < mesh.levels().time_max : el.level_s < mesh.levels().space_max;
    if (room && v[el.id] > fit.theta_mean) out.push_back(el.id);
  }
  return out;
}

/// Elements with the spatial saturation gradient above its log-mean or the
/// spatial flux estimator above one standard deviation over its log-mean,
/// plus every element of a well column.
inline std::vector<int> mark_spatial(const SpaceTimeMesh& mesh, std::span<const double> eta_sf,
                                     std::span<const double> eps_s, const ThresholdFit& fit_f,
                                     const ThresholdFit& fit_e, std::span<const int> well_columns) {
  std::vector<char> well(mesh.columns().size(), 0);
  for (int c : well_columns) well.at(static_cast<std::size_t>(c)) = 1;
  std::vector<int> out;
  for (const auto& el : mesh.elements()) {
    if (el.level_s >= mesh.levels().space_max) continue;
    const bool by_e = !fit_e.sentinel && eps_s[el.id] > fit_e.theta_mean;
    const bool by_f = !fit_f.sentinel && eta_sf[el.id] > fit_f.theta_hi;
    if (well[el.column] || by_e || by_f) out.push_back(el.id);
  }
  return out;
}

}  // namespace stflow
