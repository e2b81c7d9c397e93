#include <gtest/gtest.h>

#include <fstream>
#include <json.hpp>

#include "cfsdcn/data.hpp"
#include "cfsdcn/evaluate.hpp"
#include "cfsdcn/hsc_io.hpp"
#include "cfsdcn/network.hpp"
#include "cli_runner.hpp"
#include "test_util.hpp"

namespace cfsdcn {
namespace {

namespace fs = std::filesystem;
using testing::run_cli;
using testing::slurp;

constexpr const char* kTinyRun =
    "[model]\n"
    "variant = tiny\n"
    "bands = 4\n"
    "base_channels = 8\n"
    "lcs_kernel = 3\n"
    "\n"
    "[train]\n"
    "epochs = 1\n"
    "batch = 2\n"
    "crop = 16\n"
    "crops_per_scene = 2\n"
    "lr = 0.001\n"
    "rotate = false\n"
    "flip = false\n";

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

TEST(Cli, ErrorsFollowTheContract) {
  const auto dir = testing::scratch_dir("cli_errors");
  auto r = run_cli(dir, {});
  EXPECT_EQ(r.status, 2);
  EXPECT_EQ(r.err.rfind("error: usage: ", 0), 0u) << r.err;

  r = run_cli(dir, {"simulate", "--cube", "missing", "--mask", "missing", "--out", "y"});
  EXPECT_EQ(r.status, 3);
  EXPECT_EQ(r.err.rfind("error: format: ", 0), 0u) << r.err;

  write_cube(dir / "cube", synthesize_scene(8, 8, 3, 1));
  write_mask(dir / "small", generate_mask(4, 4, 0.5, 1));
  write_mask(dir / "mask", generate_mask(8, 8, 0.5, 1));
  r = run_cli(dir, {"simulate", "--cube", "cube", "--mask", "small", "--out", "y"});
  EXPECT_EQ(r.status, 4);
  EXPECT_EQ(r.err.rfind("error: shape: ", 0), 0u) << r.err;

  r = run_cli(dir, {"simulate", "--cube", "cube", "--mask", "mask", "--noise", "poisson", "--out", "y"});
  EXPECT_EQ(r.status, 2);
  EXPECT_EQ(r.err.rfind("error: invalid-argument: ", 0), 0u) << r.err;

  write_text(dir / "bad.ini", "[model]\nvariant = tiny\nwidth = 3\n");
  r = run_cli(dir, {"init", "--config", "bad.ini", "--out", "ckpt"});
  EXPECT_EQ(r.status, 5);
  EXPECT_EQ(r.err.rfind("error: config: ", 0), 0u) << r.err;
  EXPECT_NE(r.err.find("bad.ini:3"), std::string::npos) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, VersionAndHelp) {
  const auto dir = testing::scratch_dir("cli_version");
  auto r = run_cli(dir, {"--version"});
  EXPECT_EQ(r.status, 0);
  EXPECT_FALSE(r.out.empty());
  r = run_cli(dir, {"gen-mask", "--help"});
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("--density"), std::string::npos);
}

TEST(Cli, GenMaskIsSeededAndHonoursDensity) {
  const auto dir = testing::scratch_dir("cli_mask");
  ASSERT_EQ(run_cli(dir, {"gen-mask", "--h", "12", "--w", "9", "--seed", "4", "--out", "a"}).status, 0);
  ASSERT_EQ(run_cli(dir, {"gen-mask", "--h", "12", "--w", "9", "--seed", "4", "--out", "b"}).status, 0);
  ASSERT_EQ(run_cli(dir, {"gen-mask", "--h", "12", "--w", "9", "--seed", "5", "--out", "c"}).status, 0);
  EXPECT_EQ(slurp(dir / "a.bin"), slurp(dir / "b.bin"));
  EXPECT_NE(slurp(dir / "a.bin"), slurp(dir / "c.bin"));
  ASSERT_EQ(run_cli(dir, {"gen-mask", "--h", "5", "--w", "6", "--density", "1", "--out", "ones"}).status,
            0);
  const Mask2D ones = read_mask(dir / "ones");
  EXPECT_EQ(ones.h, 5);
  EXPECT_EQ(ones.w, 6);
  for (float v : ones.data) EXPECT_EQ(v, 1.0f);
}

TEST(Cli, SimulateWidensByTheDispersion) {
  const auto dir = testing::scratch_dir("cli_simulate");
  write_cube(dir / "cube", synthesize_scene(256, 256, 28, 2));
  ASSERT_EQ(run_cli(dir, {"gen-mask", "--h", "256", "--w", "256", "--out", "mask"}).status, 0);
  const auto r = run_cli(dir, {"simulate", "--cube", "cube", "--mask", "mask", "--out", "y"});
  ASSERT_EQ(r.status, 0) << r.err;
  const Measurement y = read_measurement(dir / "y");
  EXPECT_EQ(y.h, 256);
  EXPECT_EQ(y.width, 310);
}

TEST(Cli, ShiftBackMatchesTheLibrary) {
  const auto dir = testing::scratch_dir("cli_shiftback");
  const HsiCube cube = synthesize_scene(10, 12, 5, 3);
  const Mask2D mask = generate_mask(10, 12, 0.5, 3);
  write_cube(dir / "cube", cube);
  write_mask(dir / "mask", mask);
  ASSERT_EQ(run_cli(dir, {"simulate", "--cube", "cube", "--mask", "mask", "--step", "2", "--out", "y"})
                .status,
            0);
  const auto r =
      run_cli(dir, {"shift-back", "--measurement", "y", "--bands", "5", "--step", "2", "--out", "sb"});
  ASSERT_EQ(r.status, 0) << r.err;
  const HsiCube expect = shift_back(simulate(cube, mask, {2, 5}, {}, 0), {2, 5});
  const HsiCube got = read_cube(dir / "sb");
  ASSERT_EQ(got.data.size(), expect.data.size());
  EXPECT_EQ(got.data, expect.data);
}

TEST(Cli, CountReportsPresetBudgets) {
  const auto dir = testing::scratch_dir("cli_count");
  auto r = run_cli(dir, {"count", "--variant", "S", "--json"});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["params"].get<std::int64_t>(), model_params(ModelConfig::preset("S")));
  EXPECT_NEAR(doc["gflops"].get<double>(), 10.30, 0.01);
  r = run_cli(dir, {"count", "--variant", "tiny", "--ablation", "--json"});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto ab = nlohmann::json::parse(r.out);
  EXPECT_EQ(ab["ablation"]["delta"], ab["ablation"]["expected_delta"]);
}

TEST(Cli, TrainReconstructEvaluateRoundTrip) {
  const auto dir = testing::scratch_dir("cli_pipeline");
  ASSERT_EQ(run_cli(dir, {"gen-data", "--count", "2", "--h", "16", "--w", "16", "--bands", "4", "--out",
                          "scenes"})
                .status,
            0);
  ASSERT_EQ(run_cli(dir, {"gen-mask", "--h", "16", "--w", "16", "--out", "mask"}).status, 0);
  write_text(dir / "run.ini", kTinyRun);
  auto r = run_cli(dir, {"train", "--config", "run.ini", "--data", "scenes", "--mask", "mask", "--out",
                         "run", "--quiet"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out.find("epoch 0"), std::string::npos) << r.out;

  const auto manifest = nlohmann::json::parse(slurp(dir / "run" / "manifest.json"));
  EXPECT_EQ(manifest["command"], "train");
  ASSERT_FALSE(manifest["artifacts"].empty());
  for (const auto& a : manifest["artifacts"]) {
    EXPECT_TRUE(fs::exists(dir / a.get<std::string>())) << a;
  }
  EXPECT_FALSE(manifest["seeds"].empty());

  ASSERT_EQ(run_cli(dir, {"simulate", "--cube", "scenes/scene_000", "--mask", "mask", "--out", "y"}).status,
            0);
  r = run_cli(dir, {"reconstruct", "--ckpt", "run/checkpoint", "--measurement", "y", "--mask", "mask",
                    "--out", "x"});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto loaded = load_checkpoint<float>(dir / "run" / "checkpoint");
  const HsiCube expect =
      reconstruct(loaded.model, read_measurement(dir / "y"), read_mask(dir / "mask"), loaded.cassi);
  EXPECT_EQ(read_cube(dir / "x").data, expect.data);

  r = run_cli(dir, {"evaluate", "--ckpt", "run/checkpoint", "--scenes", "scenes", "--mask", "mask",
                    "--out", "report", "--baseline", "--spectral-region", "2,2,4,4"});
  ASSERT_EQ(r.status, 0) << r.err;
  const MetricReport m = read_report_csv(dir / "report" / "metrics.csv");
  EXPECT_EQ(m.scenes.size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "report" / "baseline.csv"));
  EXPECT_TRUE(fs::exists(dir / "report" / "lcs_ablation.csv"));
  EXPECT_TRUE(fs::exists(dir / "report" / "spectral" / "scene_000.csv"));

  r = run_cli(dir, {"train", "--config", "run.ini", "--data", "scenes", "--mask", "mask", "--out",
                    "run2", "--resume", "run", "--quiet"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(slurp(dir / "run2" / "loss.csv"), slurp(dir / "run" / "loss.csv"));
}

TEST(Cli, GradcheckSingleModule) {
  const auto dir = testing::scratch_dir("cli_gradcheck");
  const auto r = run_cli(dir, {"gradcheck", "--module", "pointwise", "--seeds", "2"});
  EXPECT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("pointwise"), std::string::npos);
  EXPECT_EQ(run_cli(dir, {"gradcheck", "--module", "nope"}).status, 2);
}

}  // namespace
}  // namespace cfsdcn
