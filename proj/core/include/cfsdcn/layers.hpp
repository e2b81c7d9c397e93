#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfsdcn/ops.hpp"
#include "cfsdcn/optim.hpp"
#include "cfsdcn/random.hpp"

namespace cfsdcn {

/// Per-layer analytic cost record. `macs` counts multiply-accumulates of
/// convolutions, deformable sampling and multiplicative gating; pure
/// elementwise ops (norms, activations, residual adds) are not counted.
struct CostEntry {
  std::string name;
  std::int64_t params = 0;
  std::int64_t macs = 0;
};

class CostLedger {
 public:
  void add(std::string name, std::int64_t params, std::int64_t macs);
  std::int64_t params() const;
  std::int64_t macs() const;
  /// FLOPs reported as 2 x MACs.
  std::int64_t flops() const { return 2 * macs(); }
  /// Sum over entries whose name starts with `prefix`.
  std::int64_t params_under(const std::string& prefix) const;
  const std::vector<CostEntry>& entries() const { return entries_; }

 private:
  std::vector<CostEntry> entries_;
};

/// Fills with U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
void init_uniform_fan_in(Array4<T>& a, int fan_in, Rng& rng);

template <typename T>
Tensor<T> make_parameter(Shape4 shape, T fill = T{0});

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in, int out, int kernel, ConvOptions options, bool with_bias, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, weight, bias, options); }
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
  Shape4 account(const std::string& name, Shape4 in, CostLedger& ledger) const;

  Tensor<T> weight;
  Tensor<T> bias;
  ConvOptions options;
};

template <typename T>
class DepthwiseConv {
 public:
  DepthwiseConv() = default;
  DepthwiseConv(int channels, int kernel, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x) const {
    return depthwise_conv2d(x, weight, bias, kernel / 2);
  }
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
  Shape4 account(const std::string& name, Shape4 in, CostLedger& ledger) const;

  Tensor<T> weight;
  Tensor<T> bias;
  int kernel = 3;
};

template <typename T>
class PointwiseConv {
 public:
  PointwiseConv() = default;
  PointwiseConv(int in, int out, bool with_bias, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x) const { return pointwise_conv(x, weight, bias); }
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
  Shape4 account(const std::string& name, Shape4 in, CostLedger& ledger) const;

  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
class Upsample2x {
 public:
  Upsample2x() = default;
  Upsample2x(int in, int out, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x) const { return conv_transpose2x2(x, weight, bias); }
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
  Shape4 account(const std::string& name, Shape4 in, CostLedger& ledger) const;

  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(int channels);

  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm_channels(x, gamma, beta); }
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
  Shape4 account(const std::string& name, Shape4 in, CostLedger& ledger) const;

  Tensor<T> gamma;
  Tensor<T> beta;
};

}  // namespace cfsdcn
