#pragma once

// Linear solvers for the Newton systems: Eigen's sparse LU as the direct path,
// and restarted GMRES right-preconditioned with ILU(0) as the iterative path.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "stflow/error.hpp"

namespace stflow {

enum class LinearBackend { Direct, GmresIlu };

inline LinearBackend parse_linear_backend(const std::string& s) {
  if (s == "direct") return LinearBackend::Direct;
  if (s == "gmres" || s == "gmres-ilu") return LinearBackend::GmresIlu;
  throw ConfigError("unknown linear solver '" + s + "' (expected direct or gmres)");
}

inline const char* to_string(LinearBackend b) { return b == LinearBackend::Direct ? "direct" : "gmres"; }

struct LinearConfig {
  LinearBackend backend = LinearBackend::Direct;
  int restart = 50;
  int max_iters = 5000;
  double tol = 1e-8;  // relative to ||b||
  int fill_level = 0;

  void validate() const {
    if (!(tol > 0)) throw ConfigError("linear tol must be positive");
    if (restart < 1 || max_iters < 1) throw ConfigError("GMRES restart and max_iters must be at least 1");
    if (fill_level != 0) throw ConfigError("only ILU fill level 0 is supported");
  }

  bool operator==(const LinearConfig&) const = default;
};

struct LinearStats {
  int iterations = 0;
  double relative_residual = 0;
};

/// ILU(0): incomplete LU restricted to the sparsity pattern of A, stored in
/// one row-major matrix (unit lower factor implied).
class Ilu0 {
 public:
  using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  explicit Ilu0(const RowMatrix& a) : lu_(a) {
    lu_.makeCompressed();
    const int n = static_cast<int>(lu_.rows());
    const int* outer = lu_.outerIndexPtr();
    const int* inner = lu_.innerIndexPtr();
    double* val = lu_.valuePtr();
    diag_.assign(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i)
      for (int p = outer[i]; p < outer[i + 1]; ++p)
        if (inner[p] == i) diag_[i] = p;
    std::vector<int> pos(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
      if (diag_[i] < 0) throw SingularMatrixError("ILU(0): missing diagonal entry in row " + std::to_string(i));
      for (int p = outer[i]; p < outer[i + 1]; ++p) pos[inner[p]] = p;
      for (int p = outer[i]; p < outer[i + 1] && inner[p] < i; ++p) {
        const int k = inner[p];
        val[p] /= val[diag_[k]];
        const double lik = val[p];
        for (int q = diag_[k] + 1; q < outer[k + 1]; ++q) {
          const int j = inner[q];
          if (pos[j] >= 0) val[pos[j]] -= lik * val[q];
        }
      }
      for (int p = outer[i]; p < outer[i + 1]; ++p) pos[inner[p]] = -1;
      double& d = val[diag_[i]];
      if (std::abs(d) < 1e-300) d = 1e-300;  // keep the factor usable on a zero pivot
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    const int n = static_cast<int>(lu_.rows());
    const int* outer = lu_.outerIndexPtr();
    const int* inner = lu_.innerIndexPtr();
    const double* val = lu_.valuePtr();
    Eigen::VectorXd x = b;
    for (int i = 0; i < n; ++i) {
      double s = x[i];
      for (int p = outer[i]; p < diag_[i]; ++p) s -= val[p] * x[inner[p]];
      x[i] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = x[i];
      for (int p = diag_[i] + 1; p < outer[i + 1]; ++p) s -= val[p] * x[inner[p]];
      x[i] = s / val[diag_[i]];
    }
    return x;
  }

 private:
  RowMatrix lu_;
  std::vector<int> diag_;
};

inline std::string format_residual(double r) {
  std::ostringstream os;
  os << std::setprecision(3) << r;
  return os.str();
}

/// Restarted GMRES with right preconditioning (modified Gram-Schmidt, Givens
/// rotations). Converged when ||b - A x|| <= tol ||b||.
inline Eigen::VectorXd gmres_ilu(const Eigen::SparseMatrix<double>& a_col, const Eigen::VectorXd& b,
                                 const LinearConfig& cfg, LinearStats* stats = nullptr) {
  const Ilu0::RowMatrix a = a_col;
  const Ilu0 ilu(a);
  const int n = static_cast<int>(b.size());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  const double bnorm = b.norm();
  if (stats) *stats = {};
  if (bnorm == 0.0) return x;
  const int m = std::min(cfg.restart, std::max(n, 1));
  Eigen::MatrixXd v(n, m + 1);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
  Eigen::VectorXd cs(m), sn(m), g(m + 1);
  int total = 0;
  double rel = 1.0;
  while (total < cfg.max_iters) {
    Eigen::VectorXd r = b - a * x;
    double beta = r.norm();
    rel = beta / bnorm;
    if (rel <= cfg.tol) break;
    v.col(0) = r / beta;
    g.setZero();
    g[0] = beta;
    h.setZero();
    int k = 0;
    for (; k < m && total < cfg.max_iters; ++k, ++total) {
      Eigen::VectorXd w = a * ilu.solve(v.col(k));
      for (int i = 0; i <= k; ++i) {
        h(i, k) = w.dot(v.col(i));
        w -= h(i, k) * v.col(i);
      }
      h(k + 1, k) = w.norm();
      if (h(k + 1, k) > 0) v.col(k + 1) = w / h(k + 1, k);
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
        h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
        h(i, k) = t;
      }
      const double den = std::hypot(h(k, k), h(k + 1, k));
      cs[k] = den > 0 ? h(k, k) / den : 1.0;
      sn[k] = den > 0 ? h(k + 1, k) / den : 0.0;
      h(k, k) = den;
      h(k + 1, k) = 0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      rel = std::abs(g[k + 1]) / bnorm;
      if (rel <= cfg.tol || den == 0.0) {
        ++k;
        ++total;
        break;
      }
    }
    Eigen::VectorXd y = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    x += ilu.solve(v.leftCols(k) * y);
    if (rel <= cfg.tol) {
      rel = (b - a * x).norm() / bnorm;
      if (rel <= cfg.tol * 10) break;
    }
  }
  if (stats) *stats = {total, rel};
  if (!(rel <= cfg.tol * 10))
    throw IterativeSolverError("GMRES did not converge in " + std::to_string(total) + " iterations (relative residual " +
                                   format_residual(rel) + ")",
                               total, rel);
  return x;
}

inline Eigen::VectorXd direct_solve(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success) throw SingularMatrixError("sparse LU failed: " + lu.lastErrorMessage());
  Eigen::VectorXd x = lu.solve(b);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw SingularMatrixError("sparse LU solve failed");
  return x;
}

inline Eigen::VectorXd linear_solve(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b,
                                    const LinearConfig& cfg, LinearStats* stats = nullptr) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw SolverError("linear_solve: dimension mismatch");
  if (cfg.backend == LinearBackend::Direct) {
    if (stats) *stats = {1, 0.0};
    return direct_solve(a, b);
  }
  return gmres_ilu(a, b, cfg, stats);
}

}  // namespace stflow
