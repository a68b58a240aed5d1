#include <benchmark/benchmark.h>

#include "mufnet/attention.hpp"
#include "mufnet/encoders.hpp"
#include "mufnet/fusion.hpp"
#include "mufnet/rng.hpp"
#include "mufnet/training.hpp"

using namespace mufnet;

namespace {

FusionConfig bench_config(std::size_t dim) {
  FusionConfig cfg;
  cfg.dim = dim;
  cfg.heads = 2;
  cfg.mlp_hidden = 2 * dim;
  return cfg;
}

Matrix random(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.symmetric();
  return m;
}

void BM_ScaledDotAttention(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Matrix q = random(rng, n, 16), k = random(rng, n, 16), v = random(rng, n, 16);
  for (auto _ : state) benchmark::DoNotOptimize(scaled_dot_attention(q, k, v));
}
BENCHMARK(BM_ScaledDotAttention)->Arg(1)->Arg(49)->Arg(77);

void BM_Forward(benchmark::State& state) {
  const FusionConfig cfg = bench_config(static_cast<std::size_t>(state.range(0)));
  const ModelParams p = ModelParams::initialize(cfg, 7);
  const FeatureProvider provider(StubProvider::make(cfg.dim, 7));
  const Streams s = provider.get_streams("bench", "benchmark sample");
  for (auto _ : state) benchmark::DoNotOptimize(predict(s, p, cfg));
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64);

void BM_ForwardBackward(benchmark::State& state) {
  const FusionConfig cfg = bench_config(static_cast<std::size_t>(state.range(0)));
  const ModelParams p = ModelParams::initialize(cfg, 7);
  const FeatureProvider provider(StubProvider::make(cfg.dim, 7));
  const Streams s = provider.get_streams("bench", "benchmark sample");
  for (auto _ : state) {
    Tape t;
    t.backward(binary_cross_entropy(model_probabilities(t, s, p, cfg), 1));
    benchmark::DoNotOptimize(t.param_grad(p.classifier_w));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(64);

void BM_BatchGradients(benchmark::State& state) {
  const FusionConfig cfg = bench_config(16);
  std::vector<Sample> samples;
  for (int i = 0; i < 32; ++i) samples.push_back({"b" + std::to_string(i), "text " + std::to_string(i), i % 2, Split::train});
  const Dataset data(Manifest(samples), FeatureProvider(StubProvider::make(cfg.dim, 7)));
  const ModelParams p = ModelParams::initialize(cfg, 7);
  const auto idx = data.manifest().indices(Split::train);
  for (auto _ : state) benchmark::DoNotOptimize(batch_loss_and_gradients(p, cfg, data, idx));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(idx.size()));
}
BENCHMARK(BM_BatchGradients)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
