#pragma once

// Per-level rock properties from the finest-level input fields. Each coarse
// level is computed directly from the finest data, not from the level above.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "stflow/error.hpp"
#include "stflow/field.hpp"
#include "stflow/physics.hpp"

namespace stflow {

enum class UpscaleMethod { FlowBased, HarmonicArithmetic };

inline UpscaleMethod parse_upscale_method(const std::string& s) {
  if (s == "flow-based") return UpscaleMethod::FlowBased;
  if (s == "harmonic-arithmetic") return UpscaleMethod::HarmonicArithmetic;
  throw ConfigError("unknown upscaling method '" + s + "'");
}

inline const char* to_string(UpscaleMethod m) {
  return m == UpscaleMethod::FlowBased ? "flow-based" : "harmonic-arithmetic";
}

struct UpscaleSpec {
  int levels = 1;  // number of levels including the finest
  int ratio = 2;
  UpscaleMethod method = UpscaleMethod::FlowBased;

  void validate() const {
    if (levels < 1) throw ConfigError("upscaling: levels must be at least 1");
    if (ratio < 2) throw ConfigError("upscaling: ratio must be at least 2");
  }
};

namespace detail {

inline void check_divisible(const Field2D& f, int ratio) {
  if (ratio < 1 || f.nx % ratio != 0 || f.ny % ratio != 0)
    throw ConfigError("upscaling: field dimensions " + std::to_string(f.nx) + "x" + std::to_string(f.ny) +
                      " are not divisible by " + std::to_string(ratio));
}

/// Effective permeability of an r x r block (unit cells) for flow along x
/// (along_x) or y: unit pressure drop between the two opposite faces, sealed
/// lateral sides, two-point fluxes with half-cell transmissibilities at the
/// Dirichlet faces.
inline double block_flow_permeability(const Field2D& k, int i0, int j0, int r, bool along_x) {
  // Local coordinates: a runs along the flow, b across it.
  auto K = [&](int a, int b) { return along_x ? k(i0 + a, j0 + b) : k(i0 + b, j0 + a); };
  const int n = r * r;
  auto id = [r](int a, int b) { return b * r + a; };
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (int b = 0; b < r; ++b)
    for (int a = 0; a < r; ++a) {
      if (!(K(a, b) > 0)) throw ConfigError("upscaling: non-positive permeability in block");
      const int row = id(a, b);
      if (a + 1 < r) {
        const double t = 2.0 / (1.0 / K(a, b) + 1.0 / K(a + 1, b));
        trip.emplace_back(row, row, t);
        trip.emplace_back(id(a + 1, b), id(a + 1, b), t);
        trip.emplace_back(row, id(a + 1, b), -t);
        trip.emplace_back(id(a + 1, b), row, -t);
      }
      if (b + 1 < r) {
        const double t = 2.0 / (1.0 / K(a, b) + 1.0 / K(a, b + 1));
        trip.emplace_back(row, row, t);
        trip.emplace_back(id(a, b + 1), id(a, b + 1), t);
        trip.emplace_back(row, id(a, b + 1), -t);
        trip.emplace_back(id(a, b + 1), row, -t);
      }
      if (a == 0) {  // p = 1 at the inflow face
        trip.emplace_back(row, row, 2.0 * K(a, b));
        rhs[row] += 2.0 * K(a, b);
      }
      if (a == r - 1) trip.emplace_back(row, row, 2.0 * K(a, b));  // p = 0
    }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
  if (solver.info() != Eigen::Success) throw SingularMatrixError("upscaling: singular local flow problem");
  const Eigen::VectorXd p = solver.solve(rhs);
  double q = 0;
  for (int b = 0; b < r; ++b) q += 2.0 * K(0, b) * (1.0 - p[id(0, b)]);
  // K_eff = q L / (A dp) with L = A = r unit cells and dp = 1.
  return q;
}

inline double block_harmonic_arithmetic(const Field2D& k, int i0, int j0, int r, bool along_x) {
  double sum = 0;
  for (int b = 0; b < r; ++b) {
    double res = 0;
    for (int a = 0; a < r; ++a) res += 1.0 / (along_x ? k(i0 + a, j0 + b) : k(i0 + b, j0 + a));
    sum += r / res;
  }
  return sum / r;
}

}  // namespace detail

/// Volume-weighted mean over ratio x ratio blocks (equal fine cell volumes).
inline Field2D upscale_porosity(const Field2D& fine, int ratio) {
  detail::check_divisible(fine, ratio);
  Field2D out(fine.nx / ratio, fine.ny / ratio);
  for (int J = 0; J < out.ny; ++J)
    for (int I = 0; I < out.nx; ++I) {
      double s = 0;
      for (int j = 0; j < ratio; ++j)
        for (int i = 0; i < ratio; ++i) s += fine(I * ratio + i, J * ratio + j);
      out(I, J) = s / (ratio * ratio);
    }
  return out;
}

struct PermeabilityPair {
  Field2D kx;
  Field2D ky;
};

/// Directional effective permeability over ratio x ratio blocks. Kx uses the
/// fine Kx field with flow along x, Ky the fine Ky field with flow along y.
inline PermeabilityPair upscale_permeability(const Field2D& kx, const Field2D& ky, int ratio, UpscaleMethod method) {
  detail::check_divisible(kx, ratio);
  detail::check_divisible(ky, ratio);
  if (kx.nx != ky.nx || kx.ny != ky.ny) throw ConfigError("upscaling: Kx and Ky dimensions differ");
  PermeabilityPair out{Field2D(kx.nx / ratio, kx.ny / ratio), Field2D(kx.nx / ratio, kx.ny / ratio)};
  for (int J = 0; J < out.kx.ny; ++J)
    for (int I = 0; I < out.kx.nx; ++I) {
      const int i0 = I * ratio, j0 = J * ratio;
      if (method == UpscaleMethod::FlowBased) {
        out.kx(I, J) = detail::block_flow_permeability(kx, i0, j0, ratio, true);
        out.ky(I, J) = detail::block_flow_permeability(ky, i0, j0, ratio, false);
      } else {
        out.kx(I, J) = detail::block_harmonic_arithmetic(kx, i0, j0, ratio, true);
        out.ky(I, J) = detail::block_harmonic_arithmetic(ky, i0, j0, ratio, false);
      }
    }
  return out;
}

/// Rock properties for levels 0 (coarsest) .. levels-1 (the input fields).
inline RockField build_rock_field(const Field2D& kx, const Field2D& ky, const Field2D& phi, const UpscaleSpec& spec) {
  spec.validate();
  if (kx.nx != phi.nx || kx.ny != phi.ny || ky.nx != phi.nx || ky.ny != phi.ny)
    throw ConfigError("upscaling: property fields have different dimensions");
  RockField rock;
  rock.kx.resize(static_cast<std::size_t>(spec.levels));
  rock.ky.resize(static_cast<std::size_t>(spec.levels));
  rock.porosity.resize(static_cast<std::size_t>(spec.levels));
  const auto last = static_cast<std::size_t>(spec.levels - 1);
  rock.kx[last] = kx;
  rock.ky[last] = ky;
  rock.porosity[last] = phi;
  int r = 1;
  for (int l = spec.levels - 2; l >= 0; --l) {
    r *= spec.ratio;
    const auto k = upscale_permeability(kx, ky, r, spec.method);
    rock.kx[l] = k.kx;
    rock.ky[l] = k.ky;
    rock.porosity[l] = upscale_porosity(phi, r);
  }
  rock.validate();
  return rock;
}

}  // namespace stflow
