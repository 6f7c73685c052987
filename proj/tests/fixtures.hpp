#pragma once

#include <vector>

#include "stflow/mesh.hpp"
#include "stflow/physics.hpp"
#include "stflow/upscaling.hpp"

namespace stflow::fixtures {

inline CoarseGrid grid(int nx, int ny, double d = 8.0, double dt = 10.0) {
  CoarseGrid g;
  g.nx = nx;
  g.ny = ny;
  g.dx = d;
  g.dy = d;
  g.dt = dt;
  return g;
}

/// Homogeneous rock on every level up to space_max.
inline FluidRockModel homogeneous(const CoarseGrid& g, int space_max, double k = 100.0, double phi = 0.2) {
  FluidRockModel m;
  const int r = 1 << space_max;
  m.rock = build_rock_field(Field2D(g.nx * r, g.ny * r, k), Field2D(g.nx * r, g.ny * r, k),
                            Field2D(g.nx * r, g.ny * r, phi), UpscaleSpec{space_max + 1, 2, UpscaleMethod::FlowBased});
  return m;
}

/// Deterministic heterogeneous rock (log-permeability checkerboard-ish).
inline FluidRockModel heterogeneous(const CoarseGrid& g, int space_max) {
  FluidRockModel m;
  const int r = 1 << space_max;
  const int nx = g.nx * r, ny = g.ny * r;
  Field2D kx(nx, ny), ky(nx, ny), phi(nx, ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      kx(i, j) = 20.0 + 180.0 * ((i * 7 + j * 3) % 5) / 4.0;
      ky(i, j) = 0.5 * kx(i, j) + 10.0 * (j % 3);
      phi(i, j) = 0.15 + 0.02 * ((i + 2 * j) % 4);
    }
  m.rock = build_rock_field(kx, ky, phi, UpscaleSpec{space_max + 1, 2, UpscaleMethod::FlowBased});
  return m;
}

}  // namespace stflow::fixtures
