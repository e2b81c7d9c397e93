#include "cfsdcn/cfs_blocks.hpp"

namespace cfsdcn {

namespace {
void require_quarter(int channels) {
  if (channels < 4 || channels % 4 != 0) {
    throw ShapeError("CFSAB needs channels divisible by 4, got " + std::to_string(channels));
  }
}
}  // namespace

std::int64_t cfsab_param_count(int c, int k) {
  const std::int64_t q = c / 4;
  return (std::int64_t{c} * c + c)     // fine pointwise
         + (9 * std::int64_t{c} + c)   // fine depthwise 3x3
         + (q * c + q)                 // down
         + (std::int64_t{k} * k * q + q)  // large-kernel depthwise
         + (q * c + c);                // up
}

template <typename T>
Cfsab<T>::Cfsab(int channels, int lcs_kernel, Rng& rng) {
  require_quarter(channels);
  const int q = channels / 4;
  fine_pointwise = PointwiseConv<T>(channels, channels, true, rng);
  fine_depthwise = DepthwiseConv<T>(channels, 3, rng);
  lcs_down = PointwiseConv<T>(channels, q, true, rng);
  lcs_depthwise = DepthwiseConv<T>(q, lcs_kernel, rng);
  lcs_up = PointwiseConv<T>(q, channels, true, rng);
}

template <typename T>
Tensor<T> Cfsab<T>::fine_branch(const Tensor<T>& x) const {
  return add(fine_depthwise(x), fine_pointwise(x));
}

template <typename T>
Tensor<T> Cfsab<T>::lcs(const Tensor<T>& x_fine) const {
  require_quarter(x_fine.shape().c);
  return mul(lcs_up(lcs_depthwise(lcs_down(x_fine))), x_fine);
}

template <typename T>
CfsabTrace<T> Cfsab<T>::trace(const Tensor<T>& x) const {
  CfsabTrace<T> t;
  t.pointwise = fine_pointwise(x);
  t.fine = add(fine_depthwise(x), t.pointwise);
  t.down = lcs_down(t.fine);
  t.lkconv = lcs_depthwise(t.down);
  t.weight = lcs_up(t.lkconv);
  t.coarse = mul(t.weight, t.fine);
  return t;
}

template <typename T>
void Cfsab<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  fine_pointwise.collect(prefix + ".fine_pw", out);
  fine_depthwise.collect(prefix + ".fine_dw", out);
  lcs_down.collect(prefix + ".lcs_down", out);
  lcs_depthwise.collect(prefix + ".lcs_dw", out);
  lcs_up.collect(prefix + ".lcs_up", out);
}

template <typename T>
Shape4 Cfsab<T>::account(const std::string& name, Shape4 in, CostLedger& ledger) const {
  fine_pointwise.account(name + ".fine_pw", in, ledger);
  fine_depthwise.account(name + ".fine_dw", in, ledger);
  const Shape4 down = lcs_down.account(name + ".lcs_down", in, ledger);
  lcs_depthwise.account(name + ".lcs_dw", down, ledger);
  const Shape4 up = lcs_up.account(name + ".lcs_up", down, ledger);
  ledger.add(name + ".gate", 0, static_cast<std::int64_t>(up.numel()));
  return up;
}

template <typename T>
CfsConv<T>::CfsConv(int channels, const BlockOptions& options, Rng& rng) : options_(options) {
  if (options.use_cfsab) cfsab = Cfsab<T>(channels, options.lcs_kernel, rng);
  deform = DeformConv<T>(channels, options.deform_groups, rng);
}

template <typename T>
Tensor<T> CfsConv<T>::operator()(const Tensor<T>& x) const {
  if (!options_.use_cfsab) return deform(x, x);
  const Tensor<T> coarse = cfsab(x);
  return deform(options_.sample_from_coarse ? coarse : x, coarse);
}

template <typename T>
void CfsConv<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  if (options_.use_cfsab) cfsab.collect(prefix + ".cfsab", out);
  deform.collect(prefix + ".dcn", out);
}

template <typename T>
Shape4 CfsConv<T>::account(const std::string& name, Shape4 in, CostLedger& ledger) const {
  if (options_.use_cfsab) cfsab.account(name + ".cfsab", in, ledger);
  return deform.account(name + ".dcn", in, ledger);
}

template <typename T>
Cfsdcb<T>::Cfsdcb(int channels, const BlockOptions& options, Rng& rng) : options_(options) {
  norm1 = LayerNorm<T>(channels);
  if (options.use_dcb) {
    mixer = CfsConv<T>(channels, options, rng);
  } else {
    plain_depthwise = DepthwiseConv<T>(channels, 3, rng);
    plain_projection = PointwiseConv<T>(channels, channels, true, rng);
  }
  norm2 = LayerNorm<T>(channels);
  const int hidden = channels * options.ffn_expansion;
  ffn_in = PointwiseConv<T>(channels, hidden, true, rng);
  ffn_out = PointwiseConv<T>(hidden, channels, true, rng);
}

template <typename T>
Tensor<T> Cfsdcb<T>::operator()(const Tensor<T>& x) const {
  const Tensor<T> normed = norm1(x);
  const Tensor<T> mixed =
      options_.use_dcb ? mixer(normed) : plain_projection(plain_depthwise(normed));
  const Tensor<T> y = add(x, mixed);
  return add(y, ffn_out(gelu(ffn_in(norm2(y)))));
}

template <typename T>
void Cfsdcb<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  norm1.collect(prefix + ".norm1", out);
  if (options_.use_dcb) {
    mixer.collect(prefix + ".cfsconv", out);
  } else {
    plain_depthwise.collect(prefix + ".conv_dw", out);
    plain_projection.collect(prefix + ".conv_pw", out);
  }
  norm2.collect(prefix + ".norm2", out);
  ffn_in.collect(prefix + ".ffn_in", out);
  ffn_out.collect(prefix + ".ffn_out", out);
}

template <typename T>
Shape4 Cfsdcb<T>::account(const std::string& name, Shape4 in, CostLedger& ledger) const {
  norm1.account(name + ".norm1", in, ledger);
  if (options_.use_dcb) {
    mixer.account(name + ".cfsconv", in, ledger);
  } else {
    plain_depthwise.account(name + ".conv_dw", in, ledger);
    plain_projection.account(name + ".conv_pw", in, ledger);
  }
  norm2.account(name + ".norm2", in, ledger);
  const Shape4 hidden = ffn_in.account(name + ".ffn_in", in, ledger);
  return ffn_out.account(name + ".ffn_out", hidden, ledger);
}

template <typename T>
void zero_parameters(const std::vector<NamedParameter<T>>& params) {
  for (const auto& p : params) {
    Tensor<T> t = p.tensor;
    t.mutable_value().fill(T{0});
  }
}

template class Cfsab<float>;
template class Cfsab<double>;
template class CfsConv<float>;
template class CfsConv<double>;
template class Cfsdcb<float>;
template class Cfsdcb<double>;
template void zero_parameters(const std::vector<NamedParameter<float>>&);
template void zero_parameters(const std::vector<NamedParameter<double>>&);

}  // namespace cfsdcn
