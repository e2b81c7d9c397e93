#pragma once

#include <string>
#include <vector>

#include "cfsdcn/layers.hpp"

namespace cfsdcn {

// Grouped deformable convolution
//
//   out(p0) = sum_g sum_k  w_g * m_gk * x_g(p0 + p_k + dp_gk)
//
// split into a parameter-free sampling core (deform_sample) and the shared
// location-irrelevant projection w_g (a pointwise convolution).
//
// Field layouts for G groups and K = kernel^2 taps, taps enumerated row-major
// over {-r..r}^2 with r = kernel / 2:
//   offsets     (n, 2*G*K, h, w): channel 2*(g*K + k) is dy, 2*(g*K + k) + 1 is dx
//   modulation  (n, G*K, h, w):   channel g*K + k

/// Bilinear read of channels [c_begin, c_begin + c_count) of batch item n at
/// fractional (py, px). Neighbours outside the map contribute zero.
template <typename T>
std::vector<T> bilinear_sample(const Array4<T>& x, int n, int c_begin, int c_count, T py, T px);

/// Sampling core: out[n, c] = sum_k m_gk * x_c(p0 + p_k + dp_gk) for every
/// channel c of group g. Spatial size is preserved (stride 1). Gradients flow
/// to x, offsets and modulation. Throws on shape mismatch or non-finite
/// offsets.
template <typename T>
Tensor<T> deform_sample(const Tensor<T>& x, const Tensor<T>& offsets,
                        const Tensor<T>& modulation, int groups, int kernel = 3);

/// Records the smallest distance from any sampling coordinate to the integer
/// lattice over the deform_sample forwards issued on this thread while the
/// probe is alive. Bilinear sampling has kinks exactly on that lattice, so
/// finite-difference checks use this to reject non-smooth points.
class LatticeMarginProbe {
 public:
  LatticeMarginProbe();
  ~LatticeMarginProbe();
  LatticeMarginProbe(const LatticeMarginProbe&) = delete;
  LatticeMarginProbe& operator=(const LatticeMarginProbe&) = delete;

  double margin() const { return margin_; }
  void update(double m) {
    if (m < margin_) margin_ = m;
  }
  static LatticeMarginProbe* active();

 private:
  double margin_;
  LatticeMarginProbe* previous_;
};

/// Number of offset groups for `channels` when the configured count is 0:
/// the largest divisor of `channels` not exceeding max(1, channels / 16).
int auto_deform_groups(int channels);

template <typename T>
struct OffsetField {
  Tensor<T> offsets;     // (n, 2GK, h, w)
  Tensor<T> modulation;  // (n, GK, h, w), softmax over the K taps of each group
};

/// Learnables of one grouped deformable convolution: the offset/modulation
/// head (depthwise 3x3 -> GELU -> pointwise to 3GK channels, last layer
/// zero-initialized) and the output projection w_g.
template <typename T>
class DeformConv {
 public:
  DeformConv() = default;
  DeformConv(int channels, int groups, Rng& rng, int kernel = 3);

  int channels() const { return channels_; }
  int groups() const { return groups_; }
  int taps() const { return kernel_ * kernel_; }

  OffsetField<T> predict_offsets(const Tensor<T>& features) const;
  /// Sampling core + projection for an already predicted field.
  Tensor<T> apply(const Tensor<T>& x, const OffsetField<T>& field) const;
  /// Offsets predicted from `features`, values sampled from `x`.
  Tensor<T> operator()(const Tensor<T>& x, const Tensor<T>& features) const;

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
  Shape4 account(const std::string& name, Shape4 in, CostLedger& ledger) const;

  DepthwiseConv<T> head_depthwise;
  PointwiseConv<T> head_pointwise;
  PointwiseConv<T> projection;

 private:
  int channels_ = 0;
  int groups_ = 1;
  int kernel_ = 3;
};

}  // namespace cfsdcn
