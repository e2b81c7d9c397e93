#include <gtest/gtest.h>

#include <cmath>

#include "cfsdcn/metrics.hpp"
#include "cfsdcn/random.hpp"

namespace cfsdcn {
namespace {

HsiCube smooth_cube(int h, int w, int bands, std::uint64_t seed) {
  Rng rng(seed);
  HsiCube c(h, w, bands);
  for (int b = 0; b < bands; ++b) {
    const double fy = rng.uniform(0.1, 0.4);
    const double fx = rng.uniform(0.1, 0.4);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        c.at(b, y, x) = static_cast<float>(0.5 + 0.3 * std::sin(fy * y) * std::cos(fx * x) +
                                           0.05 * rng.uniform());
      }
  }
  return c;
}

TEST(Psnr, AnalyticCases) {
  EXPECT_DOUBLE_EQ(psnr_from_mse(0.01), 20.0);
  EXPECT_DOUBLE_EQ(psnr_from_mse(0.0), kPsnrCapDb);
  EXPECT_DOUBLE_EQ(psnr_from_mse(1e-30), kPsnrCapDb);
  EXPECT_NEAR(psnr_from_mse(0.04, 2.0), 20.0, 1e-12);

  // Per-band constant error 0.1 everywhere: MSE 0.01 per band -> 20 dB.
  HsiCube ref(16, 16, 3, 0.5f);
  HsiCube x = ref;
  for (float& v : x.data) v += 0.1f;
  EXPECT_NEAR(psnr(x, ref), 20.0, 1e-5);
  EXPECT_NEAR(psnr(x, ref, 1.0, PsnrMode::WholeCube), 20.0, 1e-5);
  EXPECT_DOUBLE_EQ(psnr(ref, ref), kPsnrCapDb);
}

TEST(Psnr, PerBandAveragesBandValues) {
  HsiCube ref(8, 8, 2, 0.0f);
  HsiCube x = ref;
  for (int i = 0; i < 64; ++i) {
    x.band(0)[i] = 0.1f;   // 20 dB
    x.band(1)[i] = 0.01f;  // 40 dB
  }
  EXPECT_NEAR(psnr(x, ref), 30.0, 1e-4);
  EXPECT_NEAR(psnr(x, ref, 1.0, PsnrMode::WholeCube), 10 * std::log10(1 / ((0.01 + 1e-4) / 2)),
              1e-4);
}

TEST(Psnr, MonotoneInError) {
  const HsiCube ref = smooth_cube(16, 16, 2, 1);
  double last = kPsnrCapDb + 1;
  for (float e : {0.001f, 0.01f, 0.05f, 0.2f}) {
    HsiCube x = ref;
    for (float& v : x.data) v += e;
    const double p = psnr(x, ref);
    EXPECT_LT(p, last);
    last = p;
  }
}

TEST(Ssim, IdentityAndSymmetry) {
  const HsiCube a = smooth_cube(32, 24, 3, 2);
  HsiCube b = a;
  Rng rng(4);
  for (float& v : b.data) v += static_cast<float>(0.05 * rng.normal());
  EXPECT_EQ(ssim(a, a), 1.0);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  EXPECT_EQ(ssim(a, b), ssim(b, a));
  const double s = ssim(a, b);
  EXPECT_GT(s, -1.0);
  EXPECT_LT(s, 1.0);
}

TEST(Ssim, NegationScoresBelowMildNoise) {
  const HsiCube ref = smooth_cube(32, 32, 2, 5);
  HsiCube negated = ref;
  for (float& v : negated.data) v = 1.0f - v;
  HsiCube noisy = ref;
  Rng rng(6);
  for (float& v : noisy.data) v += static_cast<float>(0.02 * rng.normal());
  EXPECT_LT(ssim(negated, ref), ssim(noisy, ref));
}

TEST(Ssim, RejectsSmallOrMismatchedInput) {
  EXPECT_THROW(ssim(HsiCube(10, 20, 1), HsiCube(10, 20, 1)), ShapeError);
  EXPECT_THROW(ssim(HsiCube(16, 16, 1), HsiCube(16, 16, 2)), ShapeError);
  EXPECT_THROW(psnr(HsiCube(16, 16, 1), HsiCube(16, 15, 1)), ShapeError);
}

}  // namespace
}  // namespace cfsdcn
