#include "cfsdcn/layers.hpp"

#include <cmath>

namespace cfsdcn {

void CostLedger::add(std::string name, std::int64_t params, std::int64_t macs) {
  entries_.push_back({std::move(name), params, macs});
}

std::int64_t CostLedger::params() const {
  std::int64_t total = 0;
  for (const auto& e : entries_) total += e.params;
  return total;
}

std::int64_t CostLedger::macs() const {
  std::int64_t total = 0;
  for (const auto& e : entries_) total += e.macs;
  return total;
}

std::int64_t CostLedger::params_under(const std::string& prefix) const {
  std::int64_t total = 0;
  for (const auto& e : entries_) {
    if (e.name.compare(0, prefix.size(), prefix) == 0) total += e.params;
  }
  return total;
}

template <typename T>
void init_uniform_fan_in(Array4<T>& a, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < a.numel(); ++i) {
    a[i] = static_cast<T>(rng.uniform(-bound, bound));
  }
}

template <typename T>
Tensor<T> make_parameter(Shape4 shape, T fill) {
  return Tensor<T>::leaf(Array4<T>(shape, fill), true);
}

namespace {
template <typename T>
void push(const std::string& prefix, const char* name, const Tensor<T>& t,
          std::vector<NamedParameter<T>>& out) {
  if (t.defined()) out.push_back({prefix + "." + name, t});
}

std::int64_t count_of(Shape4 s) { return static_cast<std::int64_t>(s.numel()); }
}  // namespace

template <typename T>
Conv2d<T>::Conv2d(int in, int out, int kernel, ConvOptions o, bool with_bias, Rng& rng)
    : options(o) {
  weight = make_parameter<T>(Shape4{out, in / o.groups, kernel, kernel});
  const int fan_in = (in / o.groups) * kernel * kernel;
  init_uniform_fan_in(weight.mutable_value(), fan_in, rng);
  if (with_bias) {
    bias = make_parameter<T>(Shape4{1, out, 1, 1});
    init_uniform_fan_in(bias.mutable_value(), fan_in, rng);
  }
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  push(prefix, "weight", weight, out);
  push(prefix, "bias", bias, out);
}

template <typename T>
Shape4 Conv2d<T>::account(const std::string& name, Shape4 in, CostLedger& ledger) const {
  const Shape4 ws = weight.shape();
  const Shape4 out{in.n, ws.n, conv_output_size(in.h, ws.h, options.stride, options.padding),
                   conv_output_size(in.w, ws.w, options.stride, options.padding)};
  const std::int64_t params = count_of(ws) + (bias.defined() ? ws.n : 0);
  const std::int64_t macs = static_cast<std::int64_t>(out.numel()) * ws.c * ws.h * ws.w;
  ledger.add(name, params, macs);
  return out;
}

template <typename T>
DepthwiseConv<T>::DepthwiseConv(int channels, int k, Rng& rng) : kernel(k) {
  if (k % 2 == 0) throw ShapeError("depthwise kernel must be odd, got " + std::to_string(k));
  weight = make_parameter<T>(Shape4{channels, 1, k, k});
  init_uniform_fan_in(weight.mutable_value(), k * k, rng);
  bias = make_parameter<T>(Shape4{1, channels, 1, 1});
  init_uniform_fan_in(bias.mutable_value(), k * k, rng);
}

template <typename T>
void DepthwiseConv<T>::collect(const std::string& prefix,
                               std::vector<NamedParameter<T>>& out) const {
  push(prefix, "weight", weight, out);
  push(prefix, "bias", bias, out);
}

template <typename T>
Shape4 DepthwiseConv<T>::account(const std::string& name, Shape4 in, CostLedger& ledger) const {
  const std::int64_t params = count_of(weight.shape()) + (bias.defined() ? in.c : 0);
  ledger.add(name, params, static_cast<std::int64_t>(in.numel()) * kernel * kernel);
  return in;
}

template <typename T>
PointwiseConv<T>::PointwiseConv(int in, int out, bool with_bias, Rng& rng) {
  weight = make_parameter<T>(Shape4{out, in, 1, 1});
  init_uniform_fan_in(weight.mutable_value(), in, rng);
  if (with_bias) {
    bias = make_parameter<T>(Shape4{1, out, 1, 1});
    init_uniform_fan_in(bias.mutable_value(), in, rng);
  }
}

template <typename T>
void PointwiseConv<T>::collect(const std::string& prefix,
                               std::vector<NamedParameter<T>>& out) const {
  push(prefix, "weight", weight, out);
  push(prefix, "bias", bias, out);
}

template <typename T>
Shape4 PointwiseConv<T>::account(const std::string& name, Shape4 in, CostLedger& ledger) const {
  const Shape4 ws = weight.shape();
  const Shape4 out{in.n, ws.n, in.h, in.w};
  ledger.add(name, count_of(ws) + (bias.defined() ? ws.n : 0),
             static_cast<std::int64_t>(out.numel()) * ws.c);
  return out;
}

template <typename T>
Upsample2x<T>::Upsample2x(int in, int out, Rng& rng) {
  weight = make_parameter<T>(Shape4{in, out, 2, 2});
  init_uniform_fan_in(weight.mutable_value(), in * 4, rng);
  bias = make_parameter<T>(Shape4{1, out, 1, 1});
  init_uniform_fan_in(bias.mutable_value(), in * 4, rng);
}

template <typename T>
void Upsample2x<T>::collect(const std::string& prefix,
                            std::vector<NamedParameter<T>>& out) const {
  push(prefix, "weight", weight, out);
  push(prefix, "bias", bias, out);
}

template <typename T>
Shape4 Upsample2x<T>::account(const std::string& name, Shape4 in, CostLedger& ledger) const {
  const Shape4 ws = weight.shape();
  const Shape4 out{in.n, ws.c, in.h * 2, in.w * 2};
  ledger.add(name, count_of(ws) + (bias.defined() ? ws.c : 0),
             static_cast<std::int64_t>(in.numel()) * ws.c * 4);
  return out;
}

template <typename T>
LayerNorm<T>::LayerNorm(int channels) {
  gamma = make_parameter<T>(Shape4{1, channels, 1, 1}, T{1});
  beta = make_parameter<T>(Shape4{1, channels, 1, 1}, T{0});
}

template <typename T>
void LayerNorm<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  push(prefix, "gamma", gamma, out);
  push(prefix, "beta", beta, out);
}

template <typename T>
Shape4 LayerNorm<T>::account(const std::string& name, Shape4 in, CostLedger& ledger) const {
  ledger.add(name, 2 * static_cast<std::int64_t>(in.c), 0);
  return in;
}

#define CFSDCN_INSTANTIATE_LAYERS(T)                              \
  template void init_uniform_fan_in(Array4<T>&, int, Rng&);       \
  template Tensor<T> make_parameter(Shape4, T);                   \
  template class Conv2d<T>;                                       \
  template class DepthwiseConv<T>;                                \
  template class PointwiseConv<T>;                                \
  template class Upsample2x<T>;                                   \
  template class LayerNorm<T>;

CFSDCN_INSTANTIATE_LAYERS(float)
CFSDCN_INSTANTIATE_LAYERS(double)

}  // namespace cfsdcn
