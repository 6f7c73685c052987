#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "stflow/upscaling.hpp"

using namespace stflow;

TEST(UpscalePorosity, MeansAndPoreVolume) {
  EXPECT_DOUBLE_EQ(upscale_porosity(Field2D(4, 4, 0.2), 2)(1, 1), 0.2);
  Field2D f(2, 2);
  f.values = {0.1, 0.1, 0.3, 0.3};
  EXPECT_NEAR(upscale_porosity(f, 2)(0, 0), 0.2, 1e-15);
  Field2D g(4, 2);
  for (std::size_t i = 0; i < g.size(); ++i) g.values[i] = 0.05 * (i + 1);
  const auto c = upscale_porosity(g, 2);
  double fine_sum = 0, coarse_sum = 0;
  for (double v : g.values) fine_sum += v;
  for (double v : c.values) coarse_sum += 4 * v;
  EXPECT_NEAR(fine_sum, coarse_sum, 1e-14);
  EXPECT_THROW(upscale_porosity(Field2D(3, 2, 0.2), 2), ConfigError);
}

TEST(UpscalePermeability, HomogeneousSeriesParallel) {
  const auto h = upscale_permeability(Field2D(4, 4, 100.0), Field2D(4, 4, 100.0), 4, UpscaleMethod::FlowBased);
  EXPECT_NEAR(h.kx(0, 0), 100.0, 1e-10);
  EXPECT_NEAR(h.ky(0, 0), 100.0, 1e-10);

  // Left column 10 md, right column 1000 md: across layers along x, along layers in y.
  Field2D k(2, 2);
  k.values = {10.0, 1000.0, 10.0, 1000.0};
  const auto l = upscale_permeability(k, k, 2, UpscaleMethod::FlowBased);
  EXPECT_NEAR(l.kx(0, 0), 2.0 / (1.0 / 10.0 + 1.0 / 1000.0), 1e-9);
  EXPECT_NEAR(l.kx(0, 0), 19.80, 0.01);
  EXPECT_NEAR(l.ky(0, 0), 505.0, 1e-9);
}

TEST(UpscalePermeability, WienerBoundsOnRandomBlocks) {
  std::mt19937 rng(11);
  std::lognormal_distribution<double> dist(3.0, 1.5);
  for (UpscaleMethod method : {UpscaleMethod::FlowBased, UpscaleMethod::HarmonicArithmetic}) {
    Field2D kx(16, 16), ky(16, 16);
    for (auto& v : kx.values) v = dist(rng);
    for (auto& v : ky.values) v = dist(rng);
    for (int r : {2, 4, 8}) {
      const auto u = upscale_permeability(kx, ky, r, method);
      for (int J = 0; J < u.kx.ny; ++J)
        for (int I = 0; I < u.kx.nx; ++I)
          for (const auto* pair : {&kx, &ky}) {
            double ar = 0, hr = 0;
            for (int j = 0; j < r; ++j)
              for (int i = 0; i < r; ++i) {
                ar += (*pair)(I * r + i, J * r + j);
                hr += 1.0 / (*pair)(I * r + i, J * r + j);
              }
            ar /= r * r;
            hr = r * r / hr;
            const double v = pair == &kx ? u.kx(I, J) : u.ky(I, J);
            EXPECT_GE(v, hr * (1 - 1e-12));
            EXPECT_LE(v, ar * (1 + 1e-12));
          }
    }
  }
}

TEST(BuildRockField, LevelsAndValidation) {
  auto rock = build_rock_field(Field2D(8, 4, 50.0), Field2D(8, 4, 25.0), Field2D(8, 4, 0.25),
                               UpscaleSpec{3, 2, UpscaleMethod::FlowBased});
  ASSERT_EQ(rock.levels(), 3);
  EXPECT_EQ(rock.kx[0].nx, 2);
  EXPECT_EQ(rock.kx[0].ny, 1);
  EXPECT_EQ(rock.kx[2].nx, 8);
  EXPECT_NEAR(rock.ky[0](1, 0), 25.0, 1e-10);
  EXPECT_NEAR(rock.porosity[1](3, 1), 0.25, 1e-15);
  Field2D bad(2, 2, 10.0);
  bad(0, 0) = 0.0;
  EXPECT_THROW(upscale_permeability(bad, bad, 2, UpscaleMethod::FlowBased), ConfigError);
  EXPECT_THROW(parse_upscale_method("oversampled"), ConfigError);
}
