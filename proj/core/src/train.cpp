#include "cfsdcn/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cfsdcn/hsc_io.hpp"
#include "cfsdcn/random.hpp"
#include "tensor_blob.hpp"

namespace cfsdcn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr const char* kOptimizerFormat = "cfsdcn-optimizer";

bool all_finite(std::span<const float> v) {
  for (float x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

float max_abs(std::span<const float> v) {
  float m = 0;
  for (float x : v) m = std::max(m, std::abs(x));
  return m;
}

fs::path write_diagnostic(const fs::path& dir, const std::string& reason, const StepRecord& at,
                          const std::vector<NamedParameter<float>>& params) {
  if (dir.empty()) return {};
  fs::create_directories(dir);
  json tensors = json::array();
  for (const auto& p : params) {
    json t = {{"name", p.name},
              {"finite", p.tensor.value().all_finite()},
              {"max_abs", max_abs(p.tensor.value().data())}};
    if (p.tensor.has_grad()) {
      t["grad_finite"] = p.tensor.grad().all_finite();
      t["grad_max_abs"] = max_abs(p.tensor.grad().data());
    }
    tensors.push_back(std::move(t));
  }
  const json doc = {{"reason", reason}, {"step", at.step}, {"epoch", at.epoch},
                    {"lr", at.lr},      {"loss", std::isfinite(at.loss) ? json(at.loss) : json(nullptr)},
                    {"parameters", std::move(tensors)}};
  const fs::path path = dir / "diagnostic.json";
  std::ofstream(path) << doc.dump(2) << "\n";
  return path;
}

void copy_parameters(const CfsdcnModel<float>& from, CfsdcnModel<float>& to) {
  const auto src = from.parameters();
  const auto dst = to.parameters();
  if (src.size() != dst.size()) throw FormatError("resume: checkpoint model layout differs");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].name != dst[i].name || !(src[i].tensor.shape() == dst[i].tensor.shape())) {
      throw FormatError("resume: parameter '" + dst[i].name + "' differs from the checkpoint");
    }
    Tensor<float> t = dst[i].tensor;
    t.mutable_value() = src[i].tensor.value();
  }
}
}  // namespace

Tensor<float> reconstruction_loss(const Tensor<float>& prediction, const Tensor<float>& target,
                                  LossKind kind) {
  return kind == LossKind::Mse ? mse_loss(prediction, target) : l1_loss(prediction, target);
}

std::uint64_t batch_seed(std::uint64_t train_seed, int epoch, int index) {
  return mix_seed(mix_seed(train_seed, static_cast<std::uint64_t>(epoch)),
                  static_cast<std::uint64_t>(index));
}

int steps_per_epoch(const TrainConfig& config, std::size_t scene_count) {
  const std::size_t samples = scene_count * static_cast<std::size_t>(config.crops_per_scene);
  return static_cast<int>((samples + config.batch - 1) / config.batch);
}

void save_optimizer_state(const fs::path& path, const Adam<float>& optimizer,
                          TrainPosition position) {
  std::vector<detail::BlobTensor> tensors;
  const auto& params = optimizer.params();
  const auto& moments = optimizer.moments();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape4 s = params[i].tensor.shape();
    const std::vector<int> shape{s.n, s.c, s.h, s.w};
    std::vector<float> m = moments[i].m;
    std::vector<float> v = moments[i].v;
    if (m.empty()) {
      m.assign(s.numel(), 0.0f);
      v.assign(s.numel(), 0.0f);
    }
    tensors.push_back({"m." + params[i].name, shape, std::move(m)});
    tensors.push_back({"v." + params[i].name, shape, std::move(v)});
  }
  const json header = {{"format", kOptimizerFormat},
                       {"version", 1},
                       {"step", optimizer.steps_taken()},
                       {"epoch", position.epoch},
                       {"next_batch", position.next_batch}};
  detail::write_blob(path, header, tensors);
}

TrainPosition load_optimizer_state(const fs::path& path, Adam<float>& optimizer) {
  std::vector<detail::BlobTensor> tensors;
  const json header = detail::read_blob(path, kOptimizerFormat, tensors);
  const auto& params = optimizer.params();
  if (tensors.size() != 2 * params.size()) {
    throw FormatError(path.string() + ": optimizer state does not match the model");
  }
  auto& moments = optimizer.moments();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& m = tensors[2 * i];
    const auto& v = tensors[2 * i + 1];
    const std::size_t n = params[i].tensor.shape().numel();
    if (m.name != "m." + params[i].name || v.name != "v." + params[i].name ||
        m.values.size() != n || v.values.size() != n) {
      throw FormatError(path.string() + ": optimizer state mismatch at '" + params[i].name + "'");
    }
    moments[i].m = m.values;
    moments[i].v = v.values;
  }
  optimizer.set_steps_taken(header.at("step").get<std::int64_t>());
  return {header.at("epoch").get<int>(), header.at("next_batch").get<int>()};
}

void write_loss_csv(const fs::path& path, const std::vector<StepRecord>& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "step,epoch,lr,loss\n";
  char line[128];
  for (const auto& r : curve) {
    std::snprintf(line, sizeof line, "%lld,%d,%.9g,%.9g\n", static_cast<long long>(r.step), r.epoch,
                  r.lr, r.loss);
    out << line;
  }
}

std::vector<StepRecord> read_loss_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "step,epoch,lr,loss") throw FormatError(path.string() + ": unexpected header");
  std::vector<StepRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    StepRecord r;
    long long step = 0;
    if (std::sscanf(line.c_str(), "%lld,%d,%lf,%lf", &step, &r.epoch, &r.lr, &r.loss) != 4) {
      throw FormatError(path.string() + ": malformed row '" + line + "'");
    }
    r.step = step;
    out.push_back(r);
  }
  return out;
}

TrainResult train_model(CfsdcnModel<float>& model, const std::vector<HsiCube>& scenes,
                        const Mask2D& mask, const RunConfig& config, const TrainOptions& options) {
  config.validate();
  const TrainConfig& tc = config.train;
  if (scenes.empty()) throw std::invalid_argument("train: no training scenes");
  for (const auto& s : scenes) {
    if (s.bands != model.config().bands) {
      throw ShapeError("train: scene has " + std::to_string(s.bands) + " bands, model expects " +
                       std::to_string(model.config().bands));
    }
  }
  Adam<float> optimizer(model.parameters(), AdamOptions{tc.lr, tc.beta1, tc.beta2, tc.eps});
  TrainResult result;
  TrainPosition position;
  if (!options.resume_dir.empty()) {
    const auto loaded = load_checkpoint<float>(options.resume_dir / "checkpoint");
    copy_parameters(loaded.model, model);
    position = load_optimizer_state(options.resume_dir / "optimizer", optimizer);
    const fs::path curve = options.resume_dir / "loss.csv";
    if (fs::exists(curve)) {
      for (StepRecord r : read_loss_csv(curve)) {
        if (r.step > optimizer.steps_taken()) continue;
        // Losses are single precision; %.9g round-trips them exactly through float.
        r.loss = static_cast<float>(r.loss);
        result.curve.push_back(r);
      }
    }
  }
  if (!options.out_dir.empty()) fs::create_directories(options.out_dir);

  auto persist = [&](TrainPosition at) {
    if (options.out_dir.empty()) return;
    save_checkpoint(options.out_dir / "checkpoint", model, config.cassi);
    save_optimizer_state(options.out_dir / "optimizer", optimizer, at);
    write_loss_csv(options.out_dir / "loss.csv", result.curve);
  };

  const int per_epoch = steps_per_epoch(tc, scenes.size());
  const BatchOptions batch_options{tc.crop, tc.batch, tc.rotate, tc.flip};
  const auto params = model.parameters();
  bool capped = false;
  for (int epoch = position.epoch; epoch < tc.epochs && !capped; ++epoch) {
    const double lr = tc.lr_at(epoch);
    optimizer.set_lr(lr);
    double loss_sum = 0;
    int loss_count = 0;
    const int first = epoch == position.epoch ? position.next_batch : 0;
    for (int index = first; index < per_epoch; ++index) {
      if (tc.max_steps > 0 && optimizer.steps_taken() >= tc.max_steps) {
        persist({epoch, index});
        capped = true;
        break;
      }
      const Batch batch =
          make_batch(scenes, mask, config.cassi, batch_options, batch_seed(tc.seed, epoch, index));
      optimizer.zero_grad();
      const Tensor<float> input = Tensor<float>::leaf(batch.input);
      const Tensor<float> target = Tensor<float>::leaf(batch.target);
      StepRecord record{optimizer.steps_taken() + 1, epoch, lr, NAN};
      Tensor<float> loss;
      try {
        loss = reconstruction_loss(model.forward(input), target, tc.loss);
      } catch (const std::domain_error& e) {
        // Non-finite sampling offsets only arise from non-finite activations upstream.
        const fs::path dump = write_diagnostic(options.out_dir, e.what(), record, params);
        throw TrainingDiverged(std::string(e.what()) + " at step " + std::to_string(record.step), dump);
      }
      record.loss = loss.value()[0];
      if (!std::isfinite(record.loss)) {
        const fs::path dump = write_diagnostic(options.out_dir, "non-finite loss", record, params);
        throw TrainingDiverged("non-finite loss at step " + std::to_string(record.step), dump);
      }
      loss.backward();
      for (const auto& p : params) {
        if (p.tensor.has_grad() && !all_finite(p.tensor.grad().data())) {
          const fs::path dump =
              write_diagnostic(options.out_dir, "non-finite gradient in " + p.name, record, params);
          throw TrainingDiverged("non-finite gradient in " + p.name + " at step " +
                                     std::to_string(record.step),
                                 dump);
        }
      }
      optimizer.step();
      result.curve.push_back(record);
      loss_sum += record.loss;
      ++loss_count;
      if (options.on_step) options.on_step(record);
      if (options.stop_after && options.stop_after(record)) {
        persist({epoch, index + 1});
        capped = true;
        break;
      }
    }
    if (capped) break;
    result.epochs_completed = epoch + 1;
    if (options.on_epoch && loss_count > 0) options.on_epoch(epoch, loss_sum / loss_count);
    persist({epoch + 1, 0});
  }
  if (!capped) result.epochs_completed = std::max(result.epochs_completed, position.epoch);
  // A resumed run that was already complete still leaves a full run directory.
  if (!capped && position.epoch >= tc.epochs) persist(position);
  result.steps = optimizer.steps_taken();
  return result;
}

}  // namespace cfsdcn
