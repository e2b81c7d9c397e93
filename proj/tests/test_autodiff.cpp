#include <gtest/gtest.h>

#include "cfsdcn/ops.hpp"
#include "test_util.hpp"

namespace cfsdcn {
namespace {

using testing::random_array;

TEST(Array4, ShapeAndIndexing) {
  Array4<float> a({2, 3, 4, 5});
  EXPECT_EQ(a.numel(), 120u);
  a.at(1, 2, 3, 4) = 7.0f;
  EXPECT_EQ(a[a.numel() - 1], 7.0f);
  EXPECT_EQ(a.index(1, 0, 0, 0), 60u);
  EXPECT_THROW(Array4<float>(Shape4{1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
}

TEST(Autodiff, ChainRuleThroughSharedInput) {
  // f = sum(x * x + x) has gradient 2x + 1; x feeds two paths.
  Rng rng(3);
  auto x = Tensor<double>::leaf(random_array<double>({1, 2, 3, 3}, rng), true);
  auto f = weighted_sum(add(mul(x, x), x), Array4<double>(x.shape(), 1.0));
  f.backward();
  for (std::size_t i = 0; i < x.value().numel(); ++i) {
    EXPECT_NEAR(x.grad()[i], 2 * x.value()[i] + 1, 1e-12);
  }
}

TEST(Autodiff, GradientsAccumulateUntilZeroed) {
  auto x = Tensor<double>::leaf(Array4<double>({1, 1, 1, 2}, 1.5), true);
  const Array4<double> w({1, 1, 1, 2}, 2.0);
  weighted_sum(x, w).backward();
  weighted_sum(x, w).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
  x.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad()[1], 0.0);
}

TEST(Autodiff, NoGradGuardRecordsNothing) {
  auto x = Tensor<float>::leaf(Array4<float>({1, 1, 2, 2}, 1.0f), true);
  Tensor<float> y;
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    y = scale(x, 3.0f);
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.node()->inputs.empty());
}

TEST(Autodiff, ConstantsReceiveNoGradient) {
  auto x = Tensor<double>::leaf(Array4<double>({1, 1, 1, 1}, 2.0), true);
  auto c = Tensor<double>::leaf(Array4<double>({1, 1, 1, 1}, 5.0));
  mul(x, c).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 5.0);
  EXPECT_FALSE(c.has_grad());
}

TEST(Autodiff, BackwardNeedsScalarRoot) {
  auto x = Tensor<double>::leaf(Array4<double>({1, 1, 2, 2}, 1.0), true);
  EXPECT_THROW(scale(x, 2.0).backward(), ShapeError);
}

TEST(Autodiff, TapeReplaysInReverseRecordingOrder) {
  auto x = Tensor<double>::leaf(Array4<double>({1, 1, 1, 1}, 1.0), true);
  auto a = scale(x, 2.0);
  auto b = scale(a, 3.0);
  auto c = add(a, b);
  const auto order = Tape<double>::record(c.node());
  ASSERT_EQ(order.size(), 4u);
  for (std::size_t i = 1; i < order.size(); ++i) EXPECT_GT(order[i - 1]->seq, order[i]->seq);
  c.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0 + 6.0);
}

}  // namespace
}  // namespace cfsdcn
