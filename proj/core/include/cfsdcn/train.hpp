#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfsdcn/config.hpp"
#include "cfsdcn/data.hpp"
#include "cfsdcn/network.hpp"
#include "cfsdcn/optim.hpp"

namespace cfsdcn {

struct StepRecord {
  std::int64_t step = 0;  // 1-based optimizer step
  int epoch = 0;          // 0-based
  double lr = 0;
  double loss = 0;
};

struct TrainOptions {
  /// Receives `checkpoint.{json,bin}`, `optimizer.{json,bin}` (both rewritten
  /// at every epoch end) and `loss.csv`. Empty: nothing is written.
  std::filesystem::path out_dir;
  /// Directory of an earlier run to continue from where it stopped.
  std::filesystem::path resume_dir;
  std::function<void(const StepRecord&)> on_step;
  /// Called after on_step; returning true ends training there, exactly as
  /// reaching max_steps would.
  std::function<bool(const StepRecord&)> stop_after;
  std::function<void(int epoch, double mean_loss)> on_epoch;
};

struct TrainResult {
  std::vector<StepRecord> curve;  // includes steps restored from a resumed run
  int epochs_completed = 0;
  std::int64_t steps = 0;
};

/// Thrown when a step produces a non-finite loss or gradient. `dump` names the
/// diagnostic JSON written to the output directory (empty if none).
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::filesystem::path dump)
      : std::runtime_error(what), dump_(std::move(dump)) {}
  const std::filesystem::path& dump() const { return dump_; }

 private:
  std::filesystem::path dump_;
};

/// Loss between a prediction and its target under `kind`.
Tensor<float> reconstruction_loss(const Tensor<float>& prediction, const Tensor<float>& target,
                                  LossKind kind);

/// Seed of the batch drawn at (epoch, index within epoch).
std::uint64_t batch_seed(std::uint64_t train_seed, int epoch, int index);
int steps_per_epoch(const TrainConfig& config, std::size_t scene_count);

/// Adam with the step-decay schedule. Every batch is a pure function of
/// (config, scenes, mask, epoch, index), so a resumed run reproduces the
/// uninterrupted one exactly.
TrainResult train_model(CfsdcnModel<float>& model, const std::vector<HsiCube>& scenes,
                        const Mask2D& mask, const RunConfig& config,
                        const TrainOptions& options = {});

/// Where a run stopped: the next batch to draw is (epoch, next_batch).
struct TrainPosition {
  int epoch = 0;
  int next_batch = 0;
};

void save_optimizer_state(const std::filesystem::path& path, const Adam<float>& optimizer,
                          TrainPosition position);
/// Restores moments and the step counter.
TrainPosition load_optimizer_state(const std::filesystem::path& path, Adam<float>& optimizer);

void write_loss_csv(const std::filesystem::path& path, const std::vector<StepRecord>& curve);
std::vector<StepRecord> read_loss_csv(const std::filesystem::path& path);

}  // namespace cfsdcn
