#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cfsdcn/data.hpp"
#include "cfsdcn/train.hpp"
#include "test_util.hpp"

namespace cfsdcn {
namespace {

namespace fs = std::filesystem;
using testing::max_abs_diff;

RunConfig small_run() {
  RunConfig c;
  c.model = ModelConfig::preset("tiny");
  c.model.bands = 4;
  c.model.base_channels = 8;
  c.model.lcs_kernel = 3;
  c.train.crop = 16;
  c.train.batch = 2;
  c.train.crops_per_scene = 2;
  c.train.epochs = 2;
  c.train.lr = 1e-3;
  return c;
}

struct Fixture {
  std::vector<HsiCube> scenes = synthesize_dataset(2, 16, 16, 4, 3);
  Mask2D mask = generate_mask(16, 16, 0.5, 1);
};

std::vector<Array4<float>> snapshot(const CfsdcnModel<float>& m) {
  std::vector<Array4<float>> out;
  for (const auto& p : m.parameters()) out.push_back(p.tensor.value());
  return out;
}

TEST(Train, ScheduleHelpers) {
  TrainConfig t;
  t.batch = 5;
  t.crops_per_scene = 4;
  EXPECT_EQ(steps_per_epoch(t, 8), 7);
  EXPECT_EQ(steps_per_epoch(t, 5), 4);
  EXPECT_NE(batch_seed(1, 0, 1), batch_seed(1, 1, 0));
  EXPECT_EQ(batch_seed(1, 3, 2), batch_seed(1, 3, 2));
}

TEST(Train, ZeroLearningRateLeavesWeightsUnchanged) {
  Fixture f;
  RunConfig c = small_run();
  c.train.lr = 0;
  c.train.epochs = 1;
  CfsdcnModel<float> model(c.model);
  const auto before = snapshot(model);
  const TrainResult r = train_model(model, f.scenes, f.mask, c);
  EXPECT_EQ(r.steps, 2);
  const auto after = snapshot(model);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(max_abs_diff(before[i], after[i]), 0.0);
}

TEST(Train, LossFallsOnAFixedBatch) {
  Fixture f;
  RunConfig c = small_run();
  CfsdcnModel<float> model(c.model);
  const Batch batch = make_batch(f.scenes, f.mask, c.cassi, {16, 2, false, false}, 4);
  Adam<float> opt(model.parameters(), AdamOptions{4e-4});
  const auto input = Tensor<float>::leaf(batch.input);
  const auto target = Tensor<float>::leaf(batch.target);
  double last = INFINITY;
  for (int step = 0; step < 10; ++step) {
    opt.zero_grad();
    auto loss = reconstruction_loss(model.forward(input), target, LossKind::Mse);
    EXPECT_LT(loss.value()[0], last) << "step " << step;
    last = loss.value()[0];
    loss.backward();
    opt.step();
  }
}

TEST(Train, RunsAreReproducible) {
  Fixture f;
  const RunConfig c = small_run();
  CfsdcnModel<float> a(c.model);
  CfsdcnModel<float> b(c.model);
  const auto ra = train_model(a, f.scenes, f.mask, c);
  const auto rb = train_model(b, f.scenes, f.mask, c);
  ASSERT_EQ(ra.curve.size(), 4u);
  for (std::size_t i = 0; i < ra.curve.size(); ++i) EXPECT_EQ(ra.curve[i].loss, rb.curve[i].loss);
}

TEST(Train, ResumeReproducesAnUninterruptedRun) {
  Fixture f;
  const auto dir = testing::scratch_dir("resume");
  RunConfig c = small_run();
  CfsdcnModel<float> full(c.model);
  TrainOptions full_opts;
  full_opts.out_dir = dir / "full";
  const auto whole = train_model(full, f.scenes, f.mask, c, full_opts);

  RunConfig cut = c;
  cut.train.max_steps = 3;
  CfsdcnModel<float> first(c.model);
  TrainOptions first_opts;
  first_opts.out_dir = dir / "first";
  const auto part = train_model(first, f.scenes, f.mask, cut, first_opts);
  EXPECT_EQ(part.steps, 3);
  EXPECT_EQ(read_loss_csv(dir / "first" / "loss.csv").size(), 3u);

  CfsdcnModel<float> second(c.model);
  TrainOptions second_opts;
  second_opts.out_dir = dir / "second";
  second_opts.resume_dir = dir / "first";
  const auto rest = train_model(second, f.scenes, f.mask, c, second_opts);
  EXPECT_EQ(rest.steps, 4);
  ASSERT_EQ(rest.curve.size(), whole.curve.size());
  for (std::size_t i = 0; i < whole.curve.size(); ++i) {
    EXPECT_EQ(rest.curve[i].loss, whole.curve[i].loss);
    EXPECT_EQ(rest.curve[i].epoch, whole.curve[i].epoch);
  }
  const auto x = snapshot(full);
  const auto y = snapshot(second);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(max_abs_diff(x[i], y[i]), 0.0);
}

TEST(Train, StopPredicateActsLikeAStepCap) {
  Fixture f;
  const auto dir = testing::scratch_dir("stop_after");
  const RunConfig c = small_run();
  CfsdcnModel<float> stopped(c.model);
  TrainOptions opts;
  opts.out_dir = dir;
  opts.stop_after = [](const StepRecord& r) { return r.step == 3; };
  EXPECT_EQ(train_model(stopped, f.scenes, f.mask, c, opts).steps, 3);
  EXPECT_EQ(read_loss_csv(dir / "loss.csv").size(), 3u);

  RunConfig cut = c;
  cut.train.max_steps = 3;
  CfsdcnModel<float> capped(c.model);
  train_model(capped, f.scenes, f.mask, cut);
  const auto a = snapshot(stopped);
  const auto b = snapshot(capped);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(max_abs_diff(a[i], b[i]), 0.0);
}

TEST(Train, EpochEndWritesCheckpointAndCurve) {
  Fixture f;
  const auto dir = testing::scratch_dir("artifacts");
  RunConfig c = small_run();
  c.train.epochs = 1;
  CfsdcnModel<float> model(c.model);
  TrainOptions opts;
  opts.out_dir = dir;
  int epochs_seen = 0;
  opts.on_epoch = [&](int, double loss) {
    ++epochs_seen;
    EXPECT_TRUE(std::isfinite(loss));
  };
  train_model(model, f.scenes, f.mask, c, opts);
  EXPECT_EQ(epochs_seen, 1);
  for (const char* name : {"checkpoint.json", "checkpoint.bin", "optimizer.json", "optimizer.bin",
                           "loss.csv"}) {
    EXPECT_TRUE(fs::exists(dir / name)) << name;
  }
  std::ifstream in(dir / "loss.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "step,epoch,lr,loss");
  const auto curve = read_loss_csv(dir / "loss.csv");
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_EQ(curve[1].step, 2);
  EXPECT_DOUBLE_EQ(curve[0].lr, 1e-3);

  const auto loaded = load_checkpoint<float>(dir / "checkpoint");
  const auto a = snapshot(model);
  const auto b = snapshot(loaded.model);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(max_abs_diff(a[i], b[i]), 0.0);
}

TEST(Train, NonFiniteLossAbortsWithDiagnostic) {
  Fixture f;
  f.scenes[0].data[5] = std::nanf("");
  f.scenes[1].data[5] = std::nanf("");
  const auto dir = testing::scratch_dir("diverge");
  const RunConfig c = small_run();
  CfsdcnModel<float> model(c.model);
  TrainOptions opts;
  opts.out_dir = dir;
  try {
    train_model(model, f.scenes, f.mask, c, opts);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.dump(), dir / "diagnostic.json");
    EXPECT_TRUE(fs::exists(e.dump()));
  }
}

TEST(Train, RejectsBandMismatch) {
  Fixture f;
  RunConfig c = small_run();
  c.model.bands = 6;
  CfsdcnModel<float> model(c.model);
  EXPECT_THROW(train_model(model, f.scenes, f.mask, c), ShapeError);
}

TEST(Train, OptimizerStateRoundTrips) {
  Fixture f;
  const auto dir = testing::scratch_dir("optstate");
  const RunConfig c = small_run();
  CfsdcnModel<float> model(c.model);
  Adam<float> opt(model.parameters(), AdamOptions{1e-3});
  const Batch batch = make_batch(f.scenes, f.mask, c.cassi, {16, 1, false, false}, 1);
  reconstruction_loss(model.forward(Tensor<float>::leaf(batch.input)),
                      Tensor<float>::leaf(batch.target), LossKind::L1)
      .backward();
  opt.step();
  save_optimizer_state(dir / "opt", opt, {3, 1});
  Adam<float> other(model.parameters(), AdamOptions{1e-3});
  const TrainPosition pos = load_optimizer_state(dir / "opt", other);
  EXPECT_EQ(pos.epoch, 3);
  EXPECT_EQ(pos.next_batch, 1);
  EXPECT_EQ(other.steps_taken(), 1);
  for (std::size_t i = 0; i < opt.moments().size(); ++i) {
    EXPECT_EQ(other.moments()[i].m, opt.moments()[i].m);
    EXPECT_EQ(other.moments()[i].v, opt.moments()[i].v);
  }
}

}  // namespace
}  // namespace cfsdcn
