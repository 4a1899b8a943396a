#include <benchmark/benchmark.h>

#include "edgesem/graph_builder.hpp"
#include "edgesem/metrics.hpp"
#include "edgesem/model.hpp"
#include "edgesem/scoring.hpp"
#include "edgesem/synth.hpp"
#include "edgesem/trainer.hpp"

using namespace edgesem;

namespace {

WindowBatch random_batch(int hosts, int flows, std::uint64_t seed) {
  Rng rng(seed);
  WindowBatch b;
  b.t_end = 30.0;
  b.records = random_window_flows(rng, hosts, flows, 0.0, 30.0, 0.05);
  return b;
}

GraphSnapshot standardized(int hosts, int flows) {
  GraphSnapshot s = build_snapshot(random_batch(hosts, flows, 1));
  standardize(s, fit_feature_stats(std::span<const GraphSnapshot>(&s, 1)));
  return s;
}

void BM_BuildSnapshot(benchmark::State& state) {
  const WindowBatch b = random_batch(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(build_snapshot(b));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_BuildSnapshot)->Args({50, 200})->Args({200, 2000});

void BM_Forward(benchmark::State& state) {
  const GraphSnapshot s = standardized(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const ModelParams p = ModelParams::initialize({}, 3);
  const std::vector<std::uint8_t> none(s.num_edges(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(forward(p, s, none));
}
BENCHMARK(BM_Forward)->Args({20, 60})->Args({50, 300});

void BM_TrainStep(benchmark::State& state) {
  const GraphSnapshot s = standardized(50, 300);
  const ModelParams p = ModelParams::initialize({}, 4);
  Rng rng(5);
  for (auto _ : state) {
    const auto mask = sample_mask(s.num_edges(), 0.2, rng);
    ForwardOptions opt{true, &rng};
    const ForwardPass pass(p, s, mask_flags(s.num_edges(), mask), mask, opt);
    const LossGradient g = loss_and_gradient(pass.predictions(), s, {});
    benchmark::DoNotOptimize(pass.backward(g.d_reg, g.d_logits));
  }
}
BENCHMARK(BM_TrainStep);

void BM_ScoreEdges(benchmark::State& state) {
  const GraphSnapshot s = standardized(50, 300);
  const ModelParams p = ModelParams::initialize({}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(score_edges(s, p, 0.2, 7));
}
BENCHMARK(BM_ScoreEdges);

void BM_RocAuc(benchmark::State& state) {
  Rng rng(8);
  std::vector<double> s(static_cast<std::size_t>(state.range(0)));
  std::vector<std::uint8_t> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = uniform01(rng);
    y[i] = uniform01(rng) < 0.05;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(roc_auc(s, y));
    benchmark::DoNotOptimize(average_precision(s, y));
    benchmark::DoNotOptimize(tpr_at_fpr(s, y, 0.05));
  }
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(100000);

}  // namespace
BENCHMARK_MAIN();
