#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cfsdcn/network.hpp"
#include "cfsdcn/hsc_io.hpp"
#include "test_util.hpp"

namespace cfsdcn {
namespace {

using testing::max_abs_diff;
using testing::random_array;

std::int64_t numel_sum(const std::vector<NamedParameter<float>>& params) {
  std::int64_t n = 0;
  for (const auto& p : params) n += static_cast<std::int64_t>(p.tensor.value().numel());
  return n;
}

ModelConfig small_config() {
  ModelConfig c;
  c.bands = 4;
  c.base_channels = 8;
  c.depth = 2;
  c.lcs_kernel = 3;
  return c;
}

struct Budget {
  const char* variant;
  double params;
  double gflops;
};

class PresetBudget : public ::testing::TestWithParam<Budget> {};

TEST_P(PresetBudget, WithinTolerance) {
  const Budget b = GetParam();
  const ModelConfig c = ModelConfig::preset(b.variant);
  EXPECT_EQ(c.bands, 28);
  const double params = static_cast<double>(model_params(c));
  const double gflops = model_gflops(c, 256, 256);
  EXPECT_NEAR(params / b.params, 1.0, 0.15) << params;
  EXPECT_NEAR(gflops / b.gflops, 1.0, 0.20) << gflops;
}

INSTANTIATE_TEST_SUITE_P(Variants, PresetBudget,
                         ::testing::Values(Budget{"S", 0.76e6, 9.45}, Budget{"M", 1.7e6, 18.1},
                                           Budget{"L", 2.52e6, 31.0}));

TEST(Network, ParameterCountsAgree) {
  for (const char* v : {"tiny", "S"}) {
    const ModelConfig c = ModelConfig::preset(v);
    const CfsdcnModel<float> model(c);
    const auto ledger = model.cost({1, 2 * c.bands, 64, 64});
    EXPECT_EQ(model.count_params(), numel_sum(model.parameters()));
    EXPECT_EQ(model.count_params(), ledger.params());
    EXPECT_EQ(model.count_params(), model_params(c));
  }
  EXPECT_EQ(model_params(ModelConfig::preset("tiny")), 117878);
}

TEST(Network, FlopsScaleWithPixels) {
  const ModelConfig c = ModelConfig::preset("S");
  EXPECT_NEAR(model_gflops(c, 128, 128) * 4, model_gflops(c, 256, 256), 1e-9);
}

TEST(Network, CfsabAblationDeltaIsExact) {
  for (const char* v : {"tiny", "S", "M", "L"}) {
    ModelConfig with = ModelConfig::preset(v);
    ModelConfig without = with;
    without.disable_cfsab = true;
    std::int64_t expected = 0;
    for (int l = 0; l < with.depth; ++l) {
      expected += (with.encoder_blocks + with.decoder_blocks) *
                  cfsab_param_count(with.level_channels(l), with.lcs_kernel);
    }
    expected += with.bottleneck_blocks *
                cfsab_param_count(with.level_channels(with.depth), with.lcs_kernel);
    EXPECT_EQ(model_params(with) - model_params(without), expected) << v;
  }
}

TEST(Network, CfsabCountMatchesBuiltBlock) {
  for (int c : {8, 16, 20}) {
    for (int k : {3, 7, 11}) {
      Rng rng(1);
      const Cfsab<float> block(c, k, rng);
      std::vector<NamedParameter<float>> params;
      block.collect("b", params);
      EXPECT_EQ(numel_sum(params), cfsab_param_count(c, k));
    }
  }
}

TEST(Network, LcsKernelOrdersParameterCounts) {
  ModelConfig c = ModelConfig::preset("S");
  std::vector<std::int64_t> counts;
  for (int k : {3, 7, 11}) {
    c.lcs_kernel = k;
    counts.push_back(model_params(c));
  }
  EXPECT_LT(counts[0], counts[1]);
  EXPECT_LT(counts[1], counts[2]);
}

TEST(Network, ZeroOutputConvReturnsTheFusedInput) {
  const ModelConfig c = small_config();
  const CfsdcnModel<float> model(c);
  Rng rng(3);
  const auto x = Tensor<float>::leaf(random_array<float>({2, 8, 8, 8}, rng, 0, 1));
  const auto trace = model.forward_trace(x);
  for (float v : trace.residual.value().data()) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(max_abs_diff(trace.output.value(), trace.initial.value()), 0.0);
  EXPECT_EQ(trace.output.shape(), (Shape4{2, 4, 8, 8}));
}

TEST(Network, RejectsIndivisibleSpatialSize) {
  const CfsdcnModel<float> model(small_config());
  EXPECT_THROW(model.forward(Tensor<float>::leaf(Array4<float>({1, 8, 6, 8}))), ShapeError);
  EXPECT_THROW(model.forward(Tensor<float>::leaf(Array4<float>({1, 6, 8, 8}))), ShapeError);
}

TEST(Network, ConfigValidation) {
  ModelConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.base_channels = 10;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.lcs_kernel = 4;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.deform_groups = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.bottleneck_blocks = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(ModelConfig::preset("XL"), std::invalid_argument);
}

TEST(Network, SameSeedSameWeights) {
  ModelConfig c = small_config();
  const CfsdcnModel<float> a(c);
  const CfsdcnModel<float> b(c);
  c.seed = 2;
  const CfsdcnModel<float> d(c);
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  const auto pd = d.parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_EQ(max_abs_diff(pa[i].tensor.value(), pb[i].tensor.value()), 0.0);
    differs = differs || max_abs_diff(pa[i].tensor.value(), pd[i].tensor.value()) > 0;
  }
  EXPECT_TRUE(differs);
}

TEST(Network, CheckpointRoundTripIsBitExact) {
  const auto dir = testing::scratch_dir("checkpoint");
  ModelConfig c = small_config();
  c.variant = "custom";
  c.sample_from_coarse = true;
  CfsdcnModel<float> model(c);
  Rng rng(5);
  for (auto& p : model.parameters()) {
    Tensor<float> t = p.tensor;
    for (float& v : t.mutable_value().data()) v += static_cast<float>(0.01 * rng.normal());
  }
  CassiConfig cassi;
  cassi.step = 1;
  cassi.noise = NoiseSpec::parse("gaussian:0.02");
  save_checkpoint(dir / "ckpt", model, cassi);
  const auto loaded = load_checkpoint<float>(dir / "ckpt.json");
  EXPECT_EQ(loaded.cassi.step, 1);
  EXPECT_EQ(loaded.cassi.noise.describe(), cassi.noise.describe());
  EXPECT_TRUE(loaded.model.config().sample_from_coarse);
  const auto x = Tensor<float>::leaf(random_array<float>({1, 8, 8, 8}, rng, 0, 1));
  EXPECT_EQ(max_abs_diff(model.forward(x).value(), loaded.model.forward(x).value()), 0.0);
}

TEST(Network, CheckpointErrors) {
  const auto dir = testing::scratch_dir("checkpoint_errors");
  const CfsdcnModel<float> model(small_config());
  save_checkpoint(dir / "ckpt", model, CassiConfig{});
  EXPECT_THROW(load_checkpoint<float>(dir / "missing"), FormatError);
  std::filesystem::resize_file(dir / "ckpt.bin", 64);
  EXPECT_THROW(load_checkpoint<float>(dir / "ckpt"), FormatError);

  save_checkpoint(dir / "ckpt", model, CassiConfig{});
  std::ifstream in(dir / "ckpt.json");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto pos = text.find("cfsdcn-checkpoint");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 17, "something-else-xx");
  std::ofstream(dir / "ckpt.json") << text;
  EXPECT_THROW(load_checkpoint<float>(dir / "ckpt"), FormatError);
}

TEST(Network, InputStacksScaledShiftBackAndMask) {
  Rng rng(2);
  HsiCube cube(8, 8, 4);
  for (float& v : cube.data) v = static_cast<float>(rng.uniform());
  const Mask2D mask = generate_mask(8, 8, 0.5, 1);
  const DispersionSpec spec{2, 4};
  const Measurement y = simulate(cube, mask, spec);
  const Mask3D m3 = build_mask3d(mask, spec);
  const Array4<float> in = build_network_input(y, m3, spec);
  const HsiCube base = shift_back_baseline(y, spec);
  const HsiCube raw = shift_back(y, spec);
  ASSERT_EQ(in.shape(), (Shape4{1, 8, 8, 8}));
  for (int n = 0; n < 4; ++n)
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        EXPECT_EQ(in.at(0, n, i, j), base.at(n, i, j));
        EXPECT_FLOAT_EQ(base.at(n, i, j), raw.at(n, i, j) * 0.5f);
        EXPECT_EQ(in.at(0, 4 + n, i, j), m3.at(n, i, j));
      }
}

}  // namespace
}  // namespace cfsdcn
