#pragma once

#include <cstddef>
#include <vector>

#include "stflow/error.hpp"

namespace stflow {

/// Row-major cell-valued grid, index (i, j) -> j * nx + i.
struct Field2D {
  int nx = 0;
  int ny = 0;
  std::vector<double> values;

  Field2D() = default;
  Field2D(int nx_, int ny_, double fill = 0.0)
      : nx(nx_), ny(ny_), values(static_cast<std::size_t>(nx_) * ny_, fill) {
    if (nx_ < 1 || ny_ < 1) throw MeshError("Field2D: dimensions must be positive");
  }

  std::size_t size() const { return values.size(); }
  double& operator()(int i, int j) { return values[static_cast<std::size_t>(j) * nx + i]; }
  double operator()(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }

  bool operator==(const Field2D&) const = default;
};

}  // namespace stflow
