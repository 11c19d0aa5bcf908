#include <benchmark/benchmark.h>

#include <vector>

#include "mwr/backbone.hpp"
#include "mwr/data.hpp"
#include "mwr/eval.hpp"
#include "mwr/regulator.hpp"

using namespace mwr;

namespace {

Architecture arch_for(BackboneKind kind) { return {kind, 16, 32, 2, 16.0}; }

std::vector<Sample> synthetic_samples(std::size_t n, std::uint64_t seed) {
  ShiftSpec spec;
  spec.source_size = n;
  spec.target_size = n;
  Rng rng(seed);
  const auto shift = gen_synthetic_shift(spec, rng);
  return featurize(shift.source, build_embedding(0, 4096, 16), 40);
}

void BM_PerExampleGradient(benchmark::State& state) {
  const auto kind = static_cast<BackboneKind>(state.range(0));
  const auto model = init_model(arch_for(kind), 1);
  const auto data = synthetic_samples(64, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(per_example_gradient(model, data[i++ % data.size()]));
  }
  state.SetLabel(to_string(kind));
}
BENCHMARK(BM_PerExampleGradient)->DenseRange(0, 2);

void BM_MwrStep(benchmark::State& state) {
  const auto batch_size = static_cast<std::size_t>(state.range(0));
  const auto target_size = static_cast<std::size_t>(state.range(1));
  const auto model = init_model(arch_for(BackboneKind::mlp), 1);
  const auto source = synthetic_samples(batch_size, 3);
  const auto target = synthetic_samples(target_size, 4);
  RegulatorConfig cfg;
  cfg.source_batch_size = batch_size;
  Rng rng(5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mwr_step(model, source, target, cfg, rng));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch_size));
}
BENCHMARK(BM_MwrStep)->Args({64, 100})->Args({64, 256})->Args({256, 100});

void BM_Featurize(benchmark::State& state) {
  ShiftSpec spec;
  spec.source_size = 1000;
  spec.target_size = 2;
  Rng rng(6);
  const auto shift = gen_synthetic_shift(spec, rng);
  const auto emb = build_embedding(0, 4096, 16);
  for (auto _ : state) benchmark::DoNotOptimize(featurize(shift.source, emb, 40));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_Featurize);

void BM_PermutationTest(benchmark::State& state) {
  Rng gen(7);
  PredictionRecord a;
  PredictionRecord b;
  for (int i = 0; i < 2000; ++i) {
    const std::size_t t = gen.below(2);
    a.truth.push_back(t);
    b.truth.push_back(t);
    a.predicted.push_back(gen.uniform01() < 0.7 ? t : 1 - t);
    b.predicted.push_back(gen.uniform01() < 0.65 ? t : 1 - t);
  }
  for (auto _ : state) {
    Rng rng(8);
    benchmark::DoNotOptimize(permutation_test(a, b, kDefaultPermutations, rng));
  }
}
BENCHMARK(BM_PermutationTest)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
