#include "cfsdcn/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cfsdcn/cfs_blocks.hpp"
#include "cfsdcn/network.hpp"
#include "cfsdcn/random.hpp"

namespace cfsdcn {

namespace {

using T = double;

struct Problem {
  std::vector<NamedParameter<T>> leaves;
  std::function<Tensor<T>()> forward;
  int coord_cap = std::numeric_limits<int>::max();
};

Array4<T> normal(Shape4 s, Rng& rng, double scale = 1.0) {
  Array4<T> a(s);
  for (T& v : a.data()) v = scale * rng.normal();
  return a;
}

Array4<T> uniform(Shape4 s, Rng& rng, double lo, double hi) {
  Array4<T> a(s);
  for (T& v : a.data()) v = rng.uniform(lo, hi);
  return a;
}

Tensor<T> leaf(Array4<T> value) { return Tensor<T>::leaf(std::move(value), true); }

// Zero-initialized heads (offsets, output conv) would hide whole gradient
// paths and pin every sampling point onto the lattice, so they are redrawn at
// `zero_scale`; everything else gets a small jitter.
void jitter(const std::vector<NamedParameter<T>>& params, Rng& rng, double scale,
            double zero_scale = 0.5) {
  for (const auto& p : params) {
    Tensor<T> t = p.tensor;
    auto data = t.mutable_value().data();
    const bool zero = std::all_of(data.begin(), data.end(), [](T v) { return v == 0; });
    for (T& v : data) v += (zero ? zero_scale : scale) * rng.normal();
  }
}

Problem conv2d_case(Rng& rng) {
  const int groups = 1 + static_cast<int>(rng.below(2));
  const int stride = 1 + static_cast<int>(rng.below(2));
  auto x = leaf(normal({2, 4, 7, 7}, rng));
  auto w = leaf(normal({6, 4 / groups, 3, 3}, rng, 0.5));
  auto b = leaf(normal({1, 6, 1, 1}, rng));
  return {{{"x", x}, {"weight", w}, {"bias", b}},
          [=] { return conv2d(x, w, b, ConvOptions{stride, 1, groups}); }};
}

Problem depthwise_case(Rng& rng) {
  auto x = leaf(normal({2, 3, 6, 6}, rng));
  auto w = leaf(normal({3, 1, 5, 5}, rng, 0.5));
  auto b = leaf(normal({1, 3, 1, 1}, rng));
  return {{{"x", x}, {"weight", w}, {"bias", b}}, [=] { return depthwise_conv2d(x, w, b, 2); }};
}

Problem pointwise_case(Rng& rng) {
  auto x = leaf(normal({2, 5, 4, 4}, rng));
  auto w = leaf(normal({3, 5, 1, 1}, rng, 0.5));
  auto b = leaf(normal({1, 3, 1, 1}, rng));
  return {{{"x", x}, {"weight", w}, {"bias", b}}, [=] { return pointwise_conv(x, w, b); }};
}

Problem softmax_case(Rng& rng) {
  auto x = leaf(normal({2, 12, 3, 3}, rng, 2.0));
  return {{{"x", x}}, [=] { return softmax_over_group(x, 4); }};
}

Problem deform_case(Rng& rng) {
  const int groups = 1 + static_cast<int>(rng.below(2));
  const int c = 4;
  auto x = leaf(normal({1, c, 5, 5}, rng));
  auto offsets = leaf(uniform({1, 2 * groups * 9, 5, 5}, rng, -2.0, 2.0));
  auto modulation = leaf(normal({1, groups * 9, 5, 5}, rng));
  auto w = leaf(normal({6, c, 1, 1}, rng, 0.5));
  auto b = leaf(normal({1, 6, 1, 1}, rng));
  return {{{"x", x}, {"offsets", offsets}, {"modulation", modulation}, {"weight", w}, {"bias", b}},
          [=] { return pointwise_conv(deform_sample(x, offsets, modulation, groups), w, b); }};
}

Problem cfsab_case(Rng& rng) {
  auto block = std::make_shared<Cfsab<T>>(8, 3, rng);
  std::vector<NamedParameter<T>> leaves;
  block->collect("cfsab", leaves);
  jitter(leaves, rng, 0.1);
  auto x = leaf(normal({1, 8, 6, 6}, rng));
  leaves.insert(leaves.begin(), {"x", x});
  return {leaves, [=] { return (*block)(x); }};
}

Problem cfsdcb_case(Rng& rng) {
  BlockOptions options;
  options.lcs_kernel = 3;
  options.deform_groups = 2;
  auto block = std::make_shared<Cfsdcb<T>>(8, options, rng);
  std::vector<NamedParameter<T>> leaves;
  block->collect("block", leaves);
  jitter(leaves, rng, 0.1);
  auto x = leaf(normal({1, 8, 6, 6}, rng));
  leaves.insert(leaves.begin(), {"x", x});
  return {leaves, [=] { return (*block)(x); }, 8};
}

Problem model_case(Rng& rng) {
  ModelConfig config;
  config.bands = 4;
  config.base_channels = 8;
  config.depth = 2;
  config.lcs_kernel = 3;
  config.deform_groups = 2;
  config.seed = rng.engine()();
  auto model = std::make_shared<CfsdcnModel<T>>(config);
  std::vector<NamedParameter<T>> leaves = model->parameters();
  jitter(leaves, rng, 0.05);
  auto x = leaf(uniform({1, 2 * config.bands, 4, 4}, rng, 0.0, 1.0));
  leaves.insert(leaves.begin(), {"input", x});
  return {leaves, [=] { return model->forward(x); }, 3};
}

using Builder = Problem (*)(Rng&);

const std::vector<std::pair<std::string, Builder>>& registry() {
  static const std::vector<std::pair<std::string, Builder>> r = {
      {"conv2d", conv2d_case},   {"depthwise", depthwise_case}, {"pointwise", pointwise_case},
      {"softmax_group", softmax_case}, {"deform", deform_case},  {"cfsab", cfsab_case},
      {"cfsdcb", cfsdcb_case},   {"model", model_case}};
  return r;
}

std::vector<std::size_t> pick_coords(std::size_t numel, int count, Rng& rng) {
  std::vector<std::size_t> idx(numel);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (numel <= static_cast<std::size_t>(count)) return idx;
  for (int i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.below(numel - i)]);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

const std::vector<std::string>& gradcheck_cases() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, _] : registry()) n.push_back(name);
    return n;
  }();
  return names;
}

GradcheckResult run_gradcheck(const std::string& name, const GradcheckOptions& options) {
  const auto& reg = registry();
  const auto it = std::find_if(reg.begin(), reg.end(), [&](const auto& e) { return e.first == name; });
  if (it == reg.end()) throw std::invalid_argument("unknown gradcheck case '" + name + "'");
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckResult result;
  result.name = name;
  for (int attempt = 0; attempt < options.max_attempts && result.seeds_checked < options.seeds;
       ++attempt) {
    Rng rng(mix_seed(options.seed, static_cast<std::uint64_t>(attempt)));
    Problem problem = it->second(rng);
    Tensor<T> out;
    {
      LatticeMarginProbe probe;
      out = problem.forward();
      if (probe.margin() < options.min_lattice_margin) {
        ++result.seeds_rejected;
        continue;
      }
    }
    const Array4<T> weights = normal(out.shape(), rng);
    for (auto& p : problem.leaves) p.tensor.zero_grad();
    weighted_sum(out, weights).backward();

    auto objective = [&] {
      NoGradGuard no_grad;
      return weighted_sum(problem.forward(), weights).value()[0];
    };
    const int count = std::min(options.coords_per_tensor, problem.coord_cap);
    for (auto& p : problem.leaves) {
      Tensor<T> t = p.tensor;
      const auto coords = pick_coords(t.value().numel(), count, rng);
      double worst_diff = 0;
      double scale = 0;
      for (std::size_t i : coords) {
        T& v = t.mutable_value()[i];
        const T saved = v;
        v = saved + options.step;
        const double up = objective();
        v = saved - options.step;
        const double down = objective();
        v = saved;
        const double numeric = (up - down) / (2 * options.step);
        const double analytic = t.has_grad() ? t.grad()[i] : 0.0;
        worst_diff = std::max(worst_diff, std::abs(analytic - numeric));
        scale = std::max(scale, std::abs(numeric));
      }
      const double error = worst_diff / std::max(scale, options.abs_floor);
      if (!(error <= result.max_error)) {
        result.max_error = error;
        result.worst_tensor = p.name;
      }
    }
    ++result.seeds_checked;
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.passed = result.seeds_checked >= options.seeds && result.max_error < options.tolerance;
  return result;
}

}  // namespace cfsdcn
