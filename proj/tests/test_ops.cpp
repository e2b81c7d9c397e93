#include <gtest/gtest.h>

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cfsdcn/ops.hpp"
#include "test_util.hpp"

namespace cfsdcn {
namespace {

using testing::max_abs_diff;
using testing::naive_conv2d;
using testing::random_array;

Tensor<double> leaf(Array4<double> a) { return Tensor<double>::leaf(std::move(a)); }

struct ConvCase {
  int stride, pad, groups, k;
};

class Conv2dOracle : public ::testing::TestWithParam<ConvCase> {};

TEST_P(Conv2dOracle, MatchesDirectLoops) {
  const auto p = GetParam();
  Rng rng(11);
  const auto x = random_array<double>({2, 4, 9, 7}, rng);
  const auto w = random_array<double>({8, 4 / p.groups, p.k, p.k}, rng);
  const auto b = random_array<double>({1, 8, 1, 1}, rng);
  const auto got = conv2d(leaf(x), leaf(w), leaf(b), ConvOptions{p.stride, p.pad, p.groups});
  const auto want = naive_conv2d(x, w, b, p.stride, p.pad, p.groups);
  ASSERT_EQ(got.shape(), want.shape());
  EXPECT_LT(max_abs_diff(got.value(), want), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Shapes, Conv2dOracle,
                         ::testing::Values(ConvCase{1, 1, 1, 3}, ConvCase{2, 1, 1, 4},
                                           ConvCase{1, 0, 2, 3}, ConvCase{2, 2, 4, 5},
                                           ConvCase{1, 1, 2, 1}));

TEST(Ops, ConvOutputSize) {
  EXPECT_EQ(conv_output_size(64, 4, 2, 1), 32);
  EXPECT_EQ(conv_output_size(7, 3, 1, 1), 7);
  EXPECT_EQ(conv_output_size(9, 3, 2, 0), 4);
}

TEST(Ops, DepthwiseIsGroupedConvWithOneChannelPerGroup) {
  Rng rng(5);
  const auto x = random_array<double>({2, 3, 8, 8}, rng);
  const auto w = random_array<double>({3, 1, 5, 5}, rng);
  const auto b = random_array<double>({1, 3, 1, 1}, rng);
  const auto got = depthwise_conv2d(leaf(x), leaf(w), leaf(b), 2);
  EXPECT_LT(max_abs_diff(got.value(), naive_conv2d(x, w, b, 1, 2, 3)), 1e-12);
}

TEST(Ops, PointwiseMatchesOneByOneConv) {
  Rng rng(6);
  const auto x = random_array<double>({2, 5, 4, 6}, rng);
  const auto w = random_array<double>({7, 5, 1, 1}, rng);
  const auto got = pointwise_conv(leaf(x), leaf(w), Tensor<double>());
  EXPECT_LT(max_abs_diff(got.value(), naive_conv2d(x, w, Array4<double>(), 1, 0, 1)), 1e-12);
}

TEST(Ops, TransposedConvScattersEachPixelIntoA2x2Block) {
  Rng rng(7);
  const auto x = random_array<double>({1, 3, 3, 4}, rng);
  const auto w = random_array<double>({3, 2, 2, 2}, rng);
  const auto b = random_array<double>({1, 2, 1, 1}, rng);
  const auto y = conv_transpose2x2(leaf(x), leaf(w), leaf(b)).value();
  ASSERT_EQ(y.shape(), (Shape4{1, 2, 6, 8}));
  for (int co = 0; co < 2; ++co)
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 8; ++j) {
        double want = b[co];
        for (int ci = 0; ci < 3; ++ci) want += x.at(0, ci, i / 2, j / 2) * w.at(ci, co, i % 2, j % 2);
        EXPECT_NEAR(y.at(0, co, i, j), want, 1e-12);
      }
}

TEST(Ops, SoftmaxGroupsSumToOneAndIgnoreShifts) {
  Rng rng(8);
  const auto x = random_array<double>({1, 6, 2, 2}, rng, -3, 3);
  auto shifted = x;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 4; ++i) shifted.plane(0, c)[i] += 10.0;
  const auto a = softmax_over_group(leaf(x), 3).value();
  const auto b = softmax_over_group(leaf(shifted), 3).value();
  EXPECT_LT(max_abs_diff(a, b), 1e-12);
  for (int g = 0; g < 2; ++g)
    for (int i = 0; i < 4; ++i) {
      double s = 0;
      for (int c = 0; c < 3; ++c) s += a.plane(0, g * 3 + c)[i];
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  EXPECT_THROW(softmax_over_group(leaf(x), 4), ShapeError);
}

TEST(Ops, LayerNormStandardizesEachPixel) {
  Rng rng(9);
  const auto x = random_array<double>({2, 8, 3, 3}, rng, -2, 5);
  auto gamma = leaf(Array4<double>({1, 8, 1, 1}, 1.0));
  auto beta = leaf(Array4<double>({1, 8, 1, 1}, 0.0));
  const auto y = layer_norm_channels(leaf(x), gamma, beta, 0.0).value();
  for (int n = 0; n < 2; ++n)
    for (int i = 0; i < 9; ++i) {
      double mean = 0, sq = 0;
      for (int c = 0; c < 8; ++c) mean += y.plane(n, c)[i] / 8;
      for (int c = 0; c < 8; ++c) sq += (y.plane(n, c)[i] - mean) * (y.plane(n, c)[i] - mean) / 8;
      EXPECT_NEAR(mean, 0.0, 1e-12);
      EXPECT_NEAR(sq, 1.0, 1e-10);
    }
}

TEST(Ops, GeluUsesTheErfForm) {
  Array4<double> a({1, 1, 1, 3});
  a[0] = 0.0;
  a[1] = 1.0;
  a[2] = -2.0;
  const auto y = gelu(leaf(a)).value();
  EXPECT_DOUBLE_EQ(y[0], 0.0);
  EXPECT_NEAR(y[1], 0.8413447460685429, 1e-15);
  EXPECT_NEAR(y[2], -2.0 * 0.5 * std::erfc(2.0 / std::sqrt(2.0)), 1e-15);
}

TEST(Ops, LossesAreMeans) {
  Array4<double> p({1, 1, 2, 2}, 0.0);
  Array4<double> t({1, 1, 2, 2}, 0.0);
  p[0] = 1.0;
  p[3] = -3.0;
  EXPECT_DOUBLE_EQ(mse_loss(leaf(p), leaf(t)).value()[0], (1.0 + 9.0) / 4);
  EXPECT_DOUBLE_EQ(l1_loss(leaf(p), leaf(t)).value()[0], (1.0 + 3.0) / 4);
}

TEST(Ops, ConcatThenSliceRoundTrips) {
  Rng rng(10);
  const auto a = random_array<double>({2, 3, 2, 2}, rng);
  const auto b = random_array<double>({2, 4, 2, 2}, rng);
  const auto c = concat_channels(leaf(a), leaf(b));
  EXPECT_EQ(max_abs_diff(slice_channels(c, 0, 3).value(), a), 0.0);
  EXPECT_EQ(max_abs_diff(slice_channels(c, 3, 4).value(), b), 0.0);
}

#ifdef _OPENMP
TEST(Ops, ThreadCountDoesNotChangeBits) {
  Rng rng(12);
  auto x = Tensor<float>::leaf(random_array<float>({2, 8, 16, 16}, rng), true);
  auto w = Tensor<float>::leaf(random_array<float>({8, 4, 3, 3}, rng), true);
  const Array4<float> probe = random_array<float>({2, 8, 16, 16}, rng);
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    x.zero_grad();
    w.zero_grad();
    auto y = conv2d(x, w, Tensor<float>(), ConvOptions{1, 1, 2});
    weighted_sum(y, probe).backward();
    return std::make_pair(y.value(), w.grad());
  };
  const auto one = run(1);
  const auto four = run(4);
  omp_set_num_threads(omp_get_num_procs());
  EXPECT_EQ(max_abs_diff(one.first, four.first), 0.0);
  EXPECT_EQ(max_abs_diff(one.second, four.second), 0.0);
}
#endif

}  // namespace
}  // namespace cfsdcn
