#include <gtest/gtest.h>

#include <cmath>

#include "cfsdcn/deform_conv.hpp"
#include "deform_oracle.hpp"
#include "test_util.hpp"

namespace cfsdcn {
namespace {

using testing::matched_weights;
using testing::max_abs_diff;
using testing::naive_conv2d;
using testing::random_array;
using testing::triple_sum_oracle;

TEST(DeformConv, MatchesTripleSumOracle) {
  int instances = 0;
  for (int groups : {1, 2, 4}) {
    for (int h = 1; h <= 8; ++h) {
      for (int w : {1, 3, 5, 8}) {
        Rng rng(mix_seed(100 + groups, h * 16 + w));
        const int c = 4;
        DeformConv<double> layer(c, groups, rng);
        const auto x = random_array<double>({2, c, h, w}, rng);
        const auto off = random_array<double>({2, 2 * groups * 9, h, w}, rng, -2.5, 2.5);
        const auto mod = random_array<double>({2, groups * 9, h, w}, rng);
        const OffsetField<double> field{Tensor<double>::leaf(off), Tensor<double>::leaf(mod)};
        const auto got = layer.apply(Tensor<double>::leaf(x), field).value();
        const auto want = triple_sum_oracle(x, off, mod, layer.projection.weight.value(),
                                            layer.projection.bias.value(), groups);
        ASSERT_LE(max_abs_diff(got, want), 1e-6)
            << "groups " << groups << " size " << h << "x" << w;
        ++instances;
      }
    }
  }
  EXPECT_EQ(instances, 96);
}

TEST(DeformConv, IntegerOffsetsReadPixelsExactly) {
  Rng rng(4);
  const auto x = random_array<double>({1, 2, 5, 5}, rng);
  Array4<double> off({1, 18, 5, 5}, 0.0);
  Array4<double> mod({1, 9, 5, 5}, 0.0);
  // Only the centre tap, displaced by (+1, -2).
  for (int i = 0; i < 25; ++i) {
    off.plane(0, 8)[i] = 1.0;
    off.plane(0, 9)[i] = -2.0;
    mod.plane(0, 4)[i] = 1.0;
  }
  const auto y = deform_sample(Tensor<double>::leaf(x), Tensor<double>::leaf(off),
                               Tensor<double>::leaf(mod), 1)
                     .value();
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        const bool inside = i + 1 < 5 && j - 2 >= 0;
        EXPECT_EQ(y.at(0, c, i, j), inside ? x.at(0, c, i + 1, j - 2) : 0.0);
      }
}

TEST(DeformConv, BilinearSampleInterpolatesAndZeroPads) {
  Array4<double> x({1, 1, 2, 2});
  x[0] = 1;
  x[1] = 2;
  x[2] = 3;
  x[3] = 4;
  EXPECT_DOUBLE_EQ(bilinear_sample(x, 0, 0, 1, 0.5, 0.5)[0], 2.5);
  EXPECT_DOUBLE_EQ(bilinear_sample(x, 0, 0, 1, 1.0, 0.0)[0], 3.0);
  EXPECT_DOUBLE_EQ(bilinear_sample(x, 0, 0, 1, -0.5, 0.0)[0], 0.5);
  EXPECT_DOUBLE_EQ(bilinear_sample(x, 0, 0, 1, 5.0, 5.0)[0], 0.0);
}

TEST(DeformConv, DegeneratesToStandardConvolution) {
  for (int groups : {1, 2, 4}) {
    Rng rng(50 + groups);
    const int c = 8;
    DeformConv<float> layer(c, groups, rng);
    const auto x = random_array<float>({2, c, 9, 7}, rng);
    std::vector<float> m(groups * 9);
    for (float& v : m) v = static_cast<float>(rng.uniform(0.0, 1.0));
    Array4<float> mod({2, groups * 9, 9, 7});
    for (int n = 0; n < 2; ++n)
      for (int e = 0; e < groups * 9; ++e)
        for (int i = 0; i < 63; ++i) mod.plane(n, e)[i] = m[e];
    const OffsetField<float> field{Tensor<float>::leaf(Array4<float>({2, 2 * groups * 9, 9, 7})),
                                   Tensor<float>::leaf(mod)};
    const auto got = layer.apply(Tensor<float>::leaf(x), field).value();
    const auto want = naive_conv2d(x, matched_weights(layer.projection.weight.value(), m, groups),
                                   layer.projection.bias.value(), 1, 1, 1);
    EXPECT_LE(max_abs_diff(got, want), 1e-5) << "groups " << groups;
  }
}

TEST(DeformConv, FreshHeadGivesZeroOffsetsAndUniformModulation) {
  Rng rng(9);
  const int c = 8;
  const int groups = 2;
  DeformConv<float> layer(c, groups, rng);
  const auto x = random_array<float>({1, c, 6, 6}, rng);
  const auto field = layer.predict_offsets(Tensor<float>::leaf(x));
  for (float v : field.offsets.value().data()) EXPECT_EQ(v, 0.0f);
  for (float v : field.modulation.value().data()) EXPECT_NEAR(v, 1.0f / 9, 1e-7);
  const std::vector<float> uniform(groups * 9, 1.0f / 9);
  const auto want = naive_conv2d(x, matched_weights(layer.projection.weight.value(), uniform, groups),
                                 layer.projection.bias.value(), 1, 1, 1);
  EXPECT_LE(max_abs_diff(layer(Tensor<float>::leaf(x), Tensor<float>::leaf(x)).value(), want), 1e-5);
}

TEST(DeformConv, RejectsBadShapesAndNonFiniteOffsets) {
  Rng rng(1);
  EXPECT_THROW(DeformConv<float>(6, 4, rng), ShapeError);
  auto x = Tensor<float>::leaf(Array4<float>({1, 4, 3, 3}));
  auto mod = Tensor<float>::leaf(Array4<float>({1, 9, 3, 3}));
  EXPECT_THROW(deform_sample(x, Tensor<float>::leaf(Array4<float>({1, 17, 3, 3})), mod, 1),
               ShapeError);
  Array4<float> bad({1, 18, 3, 3});
  bad[5] = std::nanf("");
  EXPECT_ANY_THROW(deform_sample(x, Tensor<float>::leaf(bad), mod, 1));
}

TEST(DeformConv, AutoGroupsDivideChannels) {
  EXPECT_EQ(auto_deform_groups(16), 1);
  EXPECT_EQ(auto_deform_groups(32), 2);
  EXPECT_EQ(auto_deform_groups(64), 4);
  for (int c : {20, 28, 36, 56, 72, 112}) {
    const int g = auto_deform_groups(c);
    EXPECT_EQ(c % g, 0);
    EXPECT_LE(g, std::max(1, c / 16));
  }
}

}  // namespace
}  // namespace cfsdcn
