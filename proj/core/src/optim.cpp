#include "cfsdcn/optim.hpp"

#include <cmath>

namespace cfsdcn {

template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamMoments<T>& state,
               std::int64_t step, const AdamOptions& o) {
  if (grad.size() != param.size()) {
    throw ShapeError("adam_step: gradient has " + std::to_string(grad.size()) +
                     " values for " + std::to_string(param.size()) + " parameters");
  }
  if (state.m.empty()) {
    state.m.assign(param.size(), T{0});
    state.v.assign(param.size(), T{0});
  }
  if (state.m.size() != param.size() || state.v.size() != param.size()) {
    throw ShapeError("adam_step: moment buffers do not match parameter size");
  }
  if (step < 1) throw std::invalid_argument("adam_step: step index must be >= 1");
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
  const T b1 = static_cast<T>(o.beta1);
  const T b2 = static_cast<T>(o.beta2);
  const T lr_t = static_cast<T>(o.lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(o.eps);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
    param[i] -= lr_t * state.m[i] / (std::sqrt(state.v[i] * inv_c2) + eps);
  }
}

template <typename T>
Adam<T>::Adam(std::vector<NamedParameter<T>> params, AdamOptions options)
    : params_(std::move(params)), moments_(params_.size()), options_(options) {}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
void Adam<T>::step() {
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<T>& t = params_[i].tensor;
    Array4<T>& g = t.grad_buffer();
    adam_step<T>(t.mutable_value().data(), g.data(), moments_[i], step_, options_);
  }
}

template void adam_step<float>(std::span<float>, std::span<const float>, AdamMoments<float>&,
                               std::int64_t, const AdamOptions&);
template void adam_step<double>(std::span<double>, std::span<const double>,
                                AdamMoments<double>&, std::int64_t, const AdamOptions&);
template class Adam<float>;
template class Adam<double>;

}  // namespace cfsdcn
