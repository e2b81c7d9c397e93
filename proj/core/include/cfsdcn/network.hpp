#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cfsdcn/cfs_blocks.hpp"
#include "cfsdcn/optics.hpp"

namespace cfsdcn {

struct ModelConfig {
  std::string variant = "custom";
  int bands = 28;
  int base_channels = 28;
  int depth = 2;
  int encoder_blocks = 1;     // N1 per encoder level
  int decoder_blocks = 1;     // N2 per decoder level
  int bottleneck_blocks = 1;  // N3
  int lcs_kernel = 7;
  int deform_groups = 0;      // 0: auto_deform_groups per level
  int ffn_expansion = 2;
  bool disable_dcb = false;
  bool disable_cfsab = false;
  bool sample_from_coarse = false;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;
  int level_channels(int level) const { return base_channels << level; }
  int level_groups(int level) const;
  BlockOptions block_options(int level) const;

  /// "S", "M", "L" (budget-tuned benchmark variants) or "tiny" (desk scale).
  static ModelConfig preset(const std::string& name);
};

/// Network input for one scene: channels [0, N) hold the shift-back of the
/// measurement scaled by 2/N (the mean open fraction of a Bernoulli(0.5)
/// mask), channels [N, 2N) hold the 3-D mask. Shape (1, 2N, H, W).
Array4<float> build_network_input(const Measurement& y, const Mask3D& mask3d,
                                  const DispersionSpec& spec);

/// The scaled shift-back cube alone: the no-learning baseline reconstruction.
HsiCube shift_back_baseline(const Measurement& y, const DispersionSpec& spec);

template <typename T>
struct ForwardTrace {
  Tensor<T> initial;   // X, after the 1x1 fusion
  Tensor<T> residual;  // R
  Tensor<T> output;    // X' = X + R
};

/// U-shaped encoder / bottleneck / decoder of CFSDCBs with residual output.
template <typename T>
class CfsdcnModel {
 public:
  explicit CfsdcnModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  /// X = Conv1x1(concat(H, M)).
  Tensor<T> initialize_input(const Tensor<T>& input) const;
  /// X' = X + Conv3x3(decoder(X)). Throws ShapeError unless H and W are
  /// divisible by 2^depth.
  Tensor<T> forward(const Tensor<T>& input) const;
  ForwardTrace<T> forward_trace(const Tensor<T>& input) const;

  std::vector<NamedParameter<T>> parameters() const;
  /// Exact enumeration of learnable scalars.
  std::int64_t count_params() const;
  /// Analytic per-layer ledger for an (n, 2N, H, W) input.
  CostLedger cost(Shape4 input) const;

  PointwiseConv<T> fusion;
  Conv2d<T> embedding;
  std::vector<std::vector<Cfsdcb<T>>> encoder;
  std::vector<Conv2d<T>> downsample;
  std::vector<Cfsdcb<T>> bottleneck;
  std::vector<Upsample2x<T>> upsample;
  std::vector<PointwiseConv<T>> skip_fusion;
  std::vector<std::vector<Cfsdcb<T>>> decoder;  // decoder[i] runs at level i
  Conv2d<T> output;

 private:
  ModelConfig config_;
};

/// GFLOPs (2 x MACs / 1e9) at an H x W x bands input.
double model_gflops(const ModelConfig& config, int h, int w);
std::int64_t model_params(const ModelConfig& config);

// Checkpoint: `<stem>.json` manifest
//   {"format": "cfsdcn-checkpoint", "version": 1, "model": {...}, "cassi": {...},
//    "dtype": "f32le", "blob": "<stem>.bin",
//    "tensors": [{"name", "shape": [n, c, h, w], "offset", "count"}, ...]}
// plus `<stem>.bin`, the concatenated little-endian float32 tensors.

inline constexpr const char* kCheckpointFormat = "cfsdcn-checkpoint";
inline constexpr int kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const CfsdcnModel<T>& model,
                     const CassiConfig& cassi);

template <typename T>
struct LoadedModel {
  CfsdcnModel<T> model;
  CassiConfig cassi;
};

template <typename T>
LoadedModel<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace cfsdcn
