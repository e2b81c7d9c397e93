#pragma once

#include "cfsdcn/autodiff.hpp"

namespace cfsdcn {

struct ConvOptions {
  int stride = 1;
  int padding = 0;
  int groups = 1;
};

/// Output spatial extent of a convolution: floor((in + 2p - k) / s) + 1.
int conv_output_size(int in, int kernel, int stride, int padding);

/// Grouped 2-D convolution, zero padding. weight: (c_out, c_in/groups, k, k);
/// bias: undefined or (1, c_out, 1, 1).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias, ConvOptions options);

/// One k x k filter per channel, stride 1. weight: (c, 1, k, k).
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                           const Tensor<T>& bias, int padding);

/// 1x1 convolution. weight: (c_out, c_in, 1, 1).
template <typename T>
Tensor<T> pointwise_conv(const Tensor<T>& x, const Tensor<T>& weight,
                         const Tensor<T>& bias);

/// Transposed convolution with kernel == stride == 2 (exact 2x upsampling).
/// weight: (c_in, c_out, 2, 2).
template <typename T>
Tensor<T> conv_transpose2x2(const Tensor<T>& x, const Tensor<T>& weight,
                            const Tensor<T>& bias);

/// Exact (erf) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int begin, int count);

/// Softmax over each contiguous run of `group_size` channels, per pixel.
template <typename T>
Tensor<T> softmax_over_group(const Tensor<T>& x, int group_size);

/// Normalizes across channels at every pixel; gamma/beta: (1, c, 1, 1).
template <typename T>
Tensor<T> layer_norm_channels(const Tensor<T>& x, const Tensor<T>& gamma,
                              const Tensor<T>& beta, T eps = T(1e-5));

/// Mean squared error, returned as a (1,1,1,1) tensor.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& prediction, const Tensor<T>& target);

/// Mean absolute error, returned as a (1,1,1,1) tensor.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& prediction, const Tensor<T>& target);

/// sum(x * weights) against a constant weight array; a scalar probe.
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, const Array4<T>& weights);

}  // namespace cfsdcn
