#include <gtest/gtest.h>

#include "cfsdcn/gradcheck.hpp"

namespace cfsdcn {
namespace {

class GradcheckCase : public ::testing::TestWithParam<std::string> {};

TEST_P(GradcheckCase, AgreesWithCentralDifferences) {
  GradcheckOptions o;
  o.seeds = GetParam() == "model" ? 2 : 4;
  const GradcheckResult r = run_gradcheck(GetParam(), o);
  EXPECT_TRUE(r.passed) << r.worst_tensor << " error " << r.max_error;
  EXPECT_EQ(r.seeds_checked, o.seeds);
  EXPECT_LT(r.max_error, o.tolerance);
}

INSTANTIATE_TEST_SUITE_P(All, GradcheckCase, ::testing::ValuesIn(gradcheck_cases()),
                         [](const auto& info) { return info.param; });

TEST(Gradcheck, ListsEveryCase) {
  const auto& cases = gradcheck_cases();
  EXPECT_EQ(cases.size(), 8u);
  EXPECT_EQ(cases.front(), "conv2d");
  EXPECT_EQ(cases.back(), "model");
}

TEST(Gradcheck, ImpossibleToleranceFails) {
  GradcheckOptions o;
  o.seeds = 2;
  o.tolerance = 1e-15;
  const GradcheckResult r = run_gradcheck("conv2d", o);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.max_error, 0.0);
  EXPECT_FALSE(r.worst_tensor.empty());
}

TEST(Gradcheck, UnknownCaseThrows) {
  EXPECT_THROW(run_gradcheck("nonexistent"), std::invalid_argument);
}

}  // namespace
}  // namespace cfsdcn
