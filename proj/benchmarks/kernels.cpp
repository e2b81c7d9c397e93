#include <benchmark/benchmark.h>

#include "cfsdcn/deform_conv.hpp"
#include "cfsdcn/network.hpp"
#include "cfsdcn/ops.hpp"
#include "cfsdcn/random.hpp"

namespace {

using namespace cfsdcn;

Tensor<float> random_leaf(Shape4 s, Rng& rng, bool grad = false) {
  Array4<float> a(s);
  for (float& v : a.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return Tensor<float>::leaf(std::move(a), grad);
}

// args: channels, spatial size
void BM_Conv3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int s = static_cast<int>(state.range(1));
  Rng rng(1);
  const auto x = random_leaf({1, c, s, s}, rng);
  const auto w = random_leaf({c, c, 3, 3}, rng);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, Tensor<float>(), {1, 1, 1}).value().data());
  state.SetItemsProcessed(state.iterations() * 2LL * c * c * 9 * s * s);
}
BENCHMARK(BM_Conv3x3)->Args({16, 64})->Args({32, 64})->Args({20, 256});

void BM_DepthwiseLarge(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  Rng rng(2);
  const auto x = random_leaf({1, 8, 128, 128}, rng);
  const auto w = random_leaf({8, 1, k, k}, rng);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(depthwise_conv2d(x, w, Tensor<float>(), k / 2).value().data());
}
BENCHMARK(BM_DepthwiseLarge)->Arg(3)->Arg(7)->Arg(11);

void BM_DeformForward(benchmark::State& state) {
  const int groups = static_cast<int>(state.range(0));
  Rng rng(3);
  DeformConv<float> layer(16, groups, rng);
  const auto x = random_leaf({1, 16, 64, 64}, rng);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(layer(x, x).value().data());
}
BENCHMARK(BM_DeformForward)->Arg(1)->Arg(2)->Arg(4);

void BM_DeformForwardBackward(benchmark::State& state) {
  Rng rng(4);
  DeformConv<float> layer(16, 2, rng);
  const auto x = random_leaf({1, 16, 64, 64}, rng, true);
  for (auto _ : state) {
    auto y = layer(x, x);
    weighted_sum(y, y.value()).backward();
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_DeformForwardBackward);

// Full reconstruction of one 64x64 measurement, tiny preset with 8 bands.
void BM_TinyModelForward(benchmark::State& state) {
  const ModelConfig config = ModelConfig::preset("tiny");
  const CfsdcnModel<float> model(config);
  Rng rng(5);
  const auto input = random_leaf({1, 2 * config.bands, 64, 64}, rng);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(input).value().data());
  state.counters["GFLOP"] = model_gflops(config, 64, 64);
}
BENCHMARK(BM_TinyModelForward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
