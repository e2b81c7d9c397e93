#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "cfsdcn/network.hpp"

namespace cfsdcn {

enum class LossKind { Mse, L1 };

struct TrainConfig {
  int epochs = 500;
  double lr = 4e-4;
  int lr_decay_every = 50;  // epochs
  double lr_decay_factor = 0.5;
  int batch = 5;
  int crop = 64;
  int crops_per_scene = 4;  // samples drawn from each scene per epoch
  bool rotate = true;       // random multiples of 90 degrees
  bool flip = true;         // random horizontal / vertical flips
  LossKind loss = LossKind::Mse;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int max_steps = 0;        // 0: no cap
  std::uint64_t seed = 1;

  /// lr * factor^floor(epoch / lr_decay_every), epoch 0-based.
  double lr_at(int epoch) const;
  /// Throws std::invalid_argument; `depth` is the model's down/up stage count.
  void validate(int depth) const;
};

std::string loss_kind_name(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

/// One run's complete settings, read from an INI-style text file:
///
///   [model]
///   variant = tiny
///   base_channels = 16
///   [cassi]
///   step = 2
///   noise = shot:11
///   [train]
///   epochs = 40
///
/// `variant = S|M|L|tiny` (if present, it must come first in [model]) loads
/// the preset before the remaining keys override it. Unknown sections or keys,
/// duplicate keys and malformed values are ConfigError.
struct RunConfig {
  ModelConfig model;
  CassiConfig cassi;
  TrainConfig train;

  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig parse_config(const std::string& text, const std::string& origin = "<string>");
RunConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const RunConfig& config);

}  // namespace cfsdcn
