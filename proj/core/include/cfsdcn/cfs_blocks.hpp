#pragma once

#include <string>
#include <vector>

#include "cfsdcn/deform_conv.hpp"

namespace cfsdcn {

struct BlockOptions {
  int lcs_kernel = 7;
  int deform_groups = 1;
  int ffn_expansion = 2;
  /// Off: the offset head reads the block input directly (plain DCB).
  bool use_cfsab = true;
  /// Off: the token mixer is a depthwise 3x3 + pointwise convolution and no
  /// deformable convolution (or CFSAB) is built.
  bool use_dcb = true;
  /// Sample deformable taps from X_coarse instead of the block input.
  bool sample_from_coarse = false;
};

/// Intermediate maps of one coarse-fine spectral-aware pass.
template <typename T>
struct CfsabTrace {
  Tensor<T> pointwise;  // X_p
  Tensor<T> fine;       // X_fine
  Tensor<T> down;       // X_down, C/4 channels
  Tensor<T> lkconv;     // X_lkconv
  Tensor<T> weight;     // X_weight
  Tensor<T> coarse;     // X_coarse
};

/// Coarse-Fine Spectral-Aware Block.
///   X_p      = Conv1x1(X_inp)
///   X_fine   = DWConv3x3(X_inp) + X_p
///   X_down   = Conv1x1(X_fine)            C -> C/4
///   X_lkconv = DWConvkxk(X_down)
///   X_weight = Conv1x1(X_lkconv)          C/4 -> C
///   X_coarse = X_weight * X_fine          (elementwise)
template <typename T>
class Cfsab {
 public:
  Cfsab() = default;
  Cfsab(int channels, int lcs_kernel, Rng& rng);

  Tensor<T> fine_branch(const Tensor<T>& x) const;
  Tensor<T> lcs(const Tensor<T>& x_fine) const;
  Tensor<T> operator()(const Tensor<T>& x) const { return lcs(fine_branch(x)); }
  CfsabTrace<T> trace(const Tensor<T>& x) const;

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
  Shape4 account(const std::string& name, Shape4 in, CostLedger& ledger) const;

  PointwiseConv<T> fine_pointwise;
  DepthwiseConv<T> fine_depthwise;
  PointwiseConv<T> lcs_down;
  DepthwiseConv<T> lcs_depthwise;
  PointwiseConv<T> lcs_up;
};

/// Exact learnable count of one Cfsab at `channels` with a k x k LCS kernel.
std::int64_t cfsab_param_count(int channels, int lcs_kernel);

/// CFSConv: offsets and modulation are predicted from the CFSAB output and
/// the deformable taps sample the block input.
template <typename T>
class CfsConv {
 public:
  CfsConv() = default;
  CfsConv(int channels, const BlockOptions& options, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x) const;

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
  Shape4 account(const std::string& name, Shape4 in, CostLedger& ledger) const;

  bool uses_cfsab() const { return options_.use_cfsab; }

  Cfsab<T> cfsab;
  DeformConv<T> deform;

 private:
  BlockOptions options_;
};

/// Residual block: x + CFSConv(LN(x)), then + FFN(LN(.)) with a pointwise
/// expansion -> GELU -> pointwise projection feed-forward.
template <typename T>
class Cfsdcb {
 public:
  Cfsdcb() = default;
  Cfsdcb(int channels, const BlockOptions& options, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x) const;

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
  Shape4 account(const std::string& name, Shape4 in, CostLedger& ledger) const;

  LayerNorm<T> norm1;
  CfsConv<T> mixer;
  DepthwiseConv<T> plain_depthwise;  // used only when use_dcb is off
  PointwiseConv<T> plain_projection;
  LayerNorm<T> norm2;
  PointwiseConv<T> ffn_in;
  PointwiseConv<T> ffn_out;

 private:
  BlockOptions options_;
};

/// Sets every parameter in `params` to zero.
template <typename T>
void zero_parameters(const std::vector<NamedParameter<T>>& params);

}  // namespace cfsdcn
