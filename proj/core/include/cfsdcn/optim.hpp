#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cfsdcn/autodiff.hpp"

namespace cfsdcn {

struct AdamOptions {
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment buffers for one parameter tensor.
template <typename T>
struct AdamMoments {
  std::vector<T> m;
  std::vector<T> v;
};

/// In-place bias-corrected Adam update. `step` is the 1-based index of the
/// update being applied.
template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamMoments<T>& state,
               std::int64_t step, const AdamOptions& options);

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<NamedParameter<T>> params, AdamOptions options);

  void zero_grad();
  /// Applies one update using each parameter's accumulated grad.
  void step();

  void set_lr(double lr) { options_.lr = lr; }
  const AdamOptions& options() const { return options_; }
  std::int64_t steps_taken() const { return step_; }
  void set_steps_taken(std::int64_t s) { step_ = s; }

  std::vector<AdamMoments<T>>& moments() { return moments_; }
  const std::vector<AdamMoments<T>>& moments() const { return moments_; }
  const std::vector<NamedParameter<T>>& params() const { return params_; }

 private:
  std::vector<NamedParameter<T>> params_;
  std::vector<AdamMoments<T>> moments_;
  AdamOptions options_;
  std::int64_t step_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace cfsdcn
