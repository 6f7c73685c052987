#pragma once

// Newton iteration on the monolithic space-time system. Each linear step
// condenses the flux unknowns: flux rows couple to their own flux only through
// a diagonal block, so the Schur complement on the cell unknowns is exact and
// half the size.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "stflow/assembly.hpp"
#include "stflow/error.hpp"
#include "stflow/linear_solver.hpp"
#include "stflow/state.hpp"

namespace stflow {

struct NewtonConfig {
  double tol_rel = 1e-6;
  double tol_abs = 1e-9;
  int max_iters = 20;
  bool damping = true;
  double max_ds = 0.2;  // per-cell saturation step cap per iteration when damping

  void validate() const {
    if (!(tol_rel > 0) || !(tol_abs > 0)) throw ConfigError("newton tolerances must be positive");
    if (max_iters < 1) throw ConfigError("newton max_iters must be at least 1");
    if (!(max_ds > 0)) throw ConfigError("newton max_ds must be positive");
  }

  bool operator==(const NewtonConfig&) const = default;
};

struct NewtonStats {
  int iterations = 0;
  int linear_iterations = 0;
  std::vector<double> residual_norms;  // scaled 2-norm, one per evaluation
  double setup_seconds = 0;            // assembly and condensation
  double solve_seconds = 0;            // linear solves
};

class NewtonFailure : public SolverError {
 public:
  NewtonFailure(const std::string& what, NewtonStats stats) : SolverError(what), stats_(std::move(stats)) {}
  const NewtonStats& stats() const { return stats_; }

 private:
  NewtonStats stats_;
};

struct NewtonResult {
  State state;
  NewtonStats stats;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Schur complement of the flux block. Returns the reduced matrix and
/// right-hand side plus what is needed to recover the flux increments.
struct Condensed {
  Eigen::SparseMatrix<double> reduced;
  Eigen::VectorXd rhs;
  Eigen::SparseMatrix<double> c;  // flux rows x cell columns
  Eigen::VectorXd d_inv;
  Eigen::VectorXd r_flux;
};

inline Condensed condense(const SparseSystem& sys, int nc) {
  const int n = sys.size(), nf = n - nc;
  std::vector<Eigen::Triplet<double>> ta, tb, tc;
  Condensed out;
  out.d_inv = Eigen::VectorXd::Zero(nf);
  for (int col = 0; col < sys.matrix.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.matrix, col); it; ++it) {
      const int row = static_cast<int>(it.row());
      if (row < nc && col < nc)
        ta.emplace_back(row, col, it.value());
      else if (row < nc)
        tb.emplace_back(row, col - nc, it.value());
      else if (col < nc)
        tc.emplace_back(row - nc, col, it.value());
      else if (row == col)
        out.d_inv[row - nc] += it.value();
      else
        throw SolverError("flux block is not diagonal");
    }
  for (int i = 0; i < nf; ++i) {
    if (out.d_inv[i] == 0.0) throw SingularMatrixError("zero flux-row diagonal");
    out.d_inv[i] = 1.0 / out.d_inv[i];
  }
  Eigen::SparseMatrix<double> a(nc, nc), b(nc, nf);
  a.setFromTriplets(ta.begin(), ta.end());
  b.setFromTriplets(tb.begin(), tb.end());
  out.c.resize(nf, nc);
  out.c.setFromTriplets(tc.begin(), tc.end());
  const Eigen::SparseMatrix<double> bd = b * out.d_inv.asDiagonal();
  out.reduced = a - (bd * out.c).pruned();
  out.r_flux = sys.rhs.tail(nf);
  out.rhs = sys.rhs.head(nc) - bd * out.r_flux;
  return out;
}

}  // namespace detail

/// Solves the full linear Newton system through the flux condensation.
inline Eigen::VectorXd solve_condensed(const SparseSystem& sys, int nc, const LinearConfig& cfg,
                                       LinearStats* stats = nullptr, double* setup_seconds = nullptr,
                                       double* solve_seconds = nullptr) {
  auto t0 = detail::Clock::now();
  auto cd = detail::condense(sys, nc);
  if (setup_seconds) *setup_seconds += detail::seconds_since(t0);
  t0 = detail::Clock::now();
  const Eigen::VectorXd dc = linear_solve(cd.reduced, cd.rhs, cfg, stats);
  if (solve_seconds) *solve_seconds += detail::seconds_since(t0);
  Eigen::VectorXd dx(sys.size());
  dx.head(nc) = dc;
  dx.tail(sys.size() - nc) = cd.d_inv.cwiseProduct(cd.r_flux - cd.c * dc);
  return dx;
}

inline NewtonResult newton_solve(const Assembler& asmb, State initial, const NewtonConfig& cfg,
                                 const LinearConfig& lin) {
  cfg.validate();
  lin.validate();
  const auto& dofs = asmb.dofs();
  NewtonResult res;
  auto& stats = res.stats;
  Eigen::VectorXd x = dofs.pack(initial);
  State st = std::move(initial);

  auto t0 = detail::Clock::now();
  SparseSystem sys = asmb.jacobian(st);
  stats.setup_seconds += detail::seconds_since(t0);
  double r0 = sys.rhs.norm();
  stats.residual_norms.push_back(r0);
  const double target = std::max(cfg.tol_abs, cfg.tol_rel * r0);
  double rn = r0;
  while (!(rn <= target)) {
    if (stats.iterations >= cfg.max_iters)
      throw NewtonFailure("Newton did not converge in " + std::to_string(cfg.max_iters) + " iterations (residual " +
                              std::to_string(rn) + ")",
                          stats);
    if (!std::isfinite(rn)) throw NewtonFailure("Newton residual is not finite", stats);
    LinearStats ls;
    Eigen::VectorXd dx;
    try {
      dx = solve_condensed(sys, dofs.cell_dofs(), lin, &ls, &stats.setup_seconds, &stats.solve_seconds);
    } catch (const SolverError& e) {
      throw NewtonFailure(std::string("linear solve failed: ") + e.what(), stats);
    }
    stats.linear_iterations += ls.iterations;
    ++stats.iterations;

    // Appleyard chop: each cell's saturation change is capped on its own so a
    // single cell flooding ahead of its neighbours does not stall the rest.
    x += dx;
    if (cfg.damping)
      for (int e = 0; e < dofs.elements; ++e) {
        const int k = dofs.saturation(e);
        const double prev = x[k] - dx[k];
        x[k] = std::clamp(prev + std::clamp(dx[k], -cfg.max_ds, cfg.max_ds), 0.0, 1.0);
      }
    st = dofs.unpack(x);

    t0 = detail::Clock::now();
    try {
      sys = asmb.jacobian(st);
    } catch (const SolverError& e) {
      throw NewtonFailure(std::string("residual evaluation failed: ") + e.what(), stats);
    }
    stats.setup_seconds += detail::seconds_since(t0);
    rn = sys.rhs.norm();
    stats.residual_norms.push_back(rn);
  }
  res.state = std::move(st);
  return res;
}

}  // namespace stflow
