#include <gtest/gtest.h>

#include <fstream>

#include "cfsdcn/data.hpp"
#include "cfsdcn/evaluate.hpp"
#include "test_util.hpp"

namespace cfsdcn {
namespace {

std::vector<NamedCube> named(const std::vector<HsiCube>& cubes) {
  std::vector<NamedCube> out;
  for (std::size_t i = 0; i < cubes.size(); ++i) out.push_back({"s" + std::to_string(i), cubes[i]});
  return out;
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

TEST(Evaluate, ReferenceScoresAtTheCap) {
  const auto refs = named(synthesize_dataset(3, 16, 16, 4, 2));
  const MetricReport r = score_reconstructions(refs, refs);
  ASSERT_EQ(r.scenes.size(), 3u);
  for (const auto& s : r.scenes) {
    EXPECT_EQ(s.psnr_db, kPsnrCapDb);
    EXPECT_EQ(s.ssim, 1.0);
  }
  EXPECT_EQ(r.mean_psnr_db, kPsnrCapDb);
}

TEST(Evaluate, MeansArePerSceneAverages) {
  const auto refs = named(synthesize_dataset(3, 16, 16, 4, 2));
  auto noisy = refs;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    for (auto& v : noisy[i].cube.data) v += 0.01f * static_cast<float>(i + 1);
  }
  const MetricReport r = score_reconstructions(noisy, refs);
  double p = 0, s = 0;
  for (const auto& m : r.scenes) {
    p += m.psnr_db / 3;
    s += m.ssim / 3;
  }
  EXPECT_NEAR(r.mean_psnr_db, p, 1e-12);
  EXPECT_NEAR(r.mean_ssim, s, 1e-12);
  EXPECT_GT(r.scenes[0].psnr_db, r.scenes[2].psnr_db);
  EXPECT_NEAR(r.scenes[0].psnr_db, 40.0, 1e-3);
}

TEST(Evaluate, ScoringRejectsMismatchedLists) {
  const auto refs = named(synthesize_dataset(2, 16, 16, 4, 2));
  std::vector<NamedCube> one(refs.begin(), refs.begin() + 1);
  EXPECT_THROW(score_reconstructions(one, refs), std::invalid_argument);
}

TEST(Evaluate, ModelReportCarriesBudgetAndIds) {
  ModelConfig c = ModelConfig::preset("tiny");
  c.bands = 4;
  CfsdcnModel<float> model(c);
  const auto scenes = named(synthesize_dataset(2, 16, 16, 4, 5));
  const Mask2D mask = generate_mask(32, 32, 0.5, 3);
  const MetricReport r = evaluate_model(model, scenes, mask, CassiConfig{}, 1);
  EXPECT_EQ(r.method, "cfsdcn");
  EXPECT_EQ(r.params, model.count_params());
  EXPECT_DOUBLE_EQ(r.gflops, model_gflops(c, 16, 16));
  ASSERT_EQ(r.scenes.size(), 2u);
  EXPECT_EQ(r.scenes[1].scene_id, "s1");
  const MetricReport again = evaluate_model(model, scenes, mask, CassiConfig{}, 1);
  EXPECT_EQ(again.mean_psnr_db, r.mean_psnr_db);
  EXPECT_THROW(evaluate_model(model, {}, mask, CassiConfig{}, 1), std::invalid_argument);
}

TEST(Evaluate, ShiftBackBaselineIsFiniteAndBelowCap) {
  const auto scenes = named(synthesize_dataset(2, 16, 16, 4, 5));
  const Mask2D mask = generate_mask(16, 16, 0.5, 3);
  const MetricReport r = evaluate_shift_back(scenes, mask, CassiConfig{}, 1);
  EXPECT_EQ(r.method, "shift-back");
  EXPECT_GT(r.mean_psnr_db, 0.0);
  EXPECT_LT(r.mean_psnr_db, 40.0);
}

TEST(Evaluate, ReportCsvSchemaAndRoundTrip) {
  const auto dir = testing::scratch_dir("report");
  MetricReport r;
  r.method = "cfsdcn";
  r.scenes = {{"a", 30.5, 0.9}, {"b", 31.5, 0.8}};
  r.finalize();
  write_report_csv(dir / "m.csv", r);
  const auto lines = lines_of(dir / "m.csv");
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "scene_id,psnr_db,ssim");
  EXPECT_EQ(lines[1].rfind("a,30.5", 0), 0u);
  EXPECT_EQ(lines[3].rfind("mean,31.0", 0), 0u);
  const MetricReport back = read_report_csv(dir / "m.csv");
  ASSERT_EQ(back.scenes.size(), 2u);
  EXPECT_NEAR(back.mean_psnr_db, 31.0, 1e-9);
  EXPECT_NEAR(back.scenes[1].ssim, 0.8, 1e-8);
  write_report_json(dir / "m.json", r);
  EXPECT_TRUE(std::filesystem::exists(dir / "m.json"));
}

TEST(Evaluate, AblationRowsSortByKernel) {
  const auto dir = testing::scratch_dir("ablation");
  write_ablation_csv(dir / "a.csv", {{11, 300, 3, 20, 0.5}, {3, 100, 1, 19, 0.4}, {7, 200, 2, 21, 0.6}});
  const auto lines = lines_of(dir / "a.csv");
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "lcs_kernel,params,gflops,psnr_db,ssim");
  EXPECT_EQ(lines[1].rfind("3,100,", 0), 0u);
  EXPECT_EQ(lines[2].rfind("7,200,", 0), 0u);
  EXPECT_EQ(lines[3].rfind("11,300,", 0), 0u);
}

TEST(Evaluate, SpectralDensityOfIdenticalCubesCorrelatesFully) {
  const auto dir = testing::scratch_dir("spectral");
  HsiCube ref = synthesize_scene(16, 16, 6, 9);
  ref.wavelengths = {450, 470, 490, 510, 530, 550};
  const double rho = write_spectral_density_csv(dir / "s.csv", ref, ref, 2, 3, 5, 4);
  EXPECT_NEAR(rho, 1.0, 1e-12);
  const auto lines = lines_of(dir / "s.csv");
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines[0], "band,wavelength_nm,reference,reconstruction");
  EXPECT_EQ(lines[1].rfind("0,450.000,", 0), 0u);
  EXPECT_THROW(write_spectral_density_csv(dir / "x.csv", ref, ref, 14, 0, 5, 4), ShapeError);
}

}  // namespace
}  // namespace cfsdcn
