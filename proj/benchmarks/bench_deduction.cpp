#include <benchmark/benchmark.h>

#include "artrec/deduction.hpp"
#include "artrec/synth.hpp"

using namespace artrec;

static void BM_DeduceBenchmarkScene(benchmark::State& state) {
  SynthConfig cfg = two_lane_benchmark(42);
  cfg.cycles = 3;
  const auto bundle = generate_scenario(cfg);
  const auto obs = degrade_to_observations(bundle);
  IdmParams p;
  for (auto _ : state) {
    benchmark::DoNotOptimize(deduce_lcvs(obs.scenario, p));
  }
}
BENCHMARK(BM_DeduceBenchmarkScene);

static void BM_VirtualEndpoints(benchmark::State& state) {
  SynthConfig cfg = two_lane_benchmark(42);
  cfg.cycles = 3;
  const auto bundle = generate_scenario(cfg);
  const auto obs = degrade_to_observations(bundle);
  IdmParams p;
  for (auto _ : state) {
    benchmark::DoNotOptimize(infer_virtual_endpoints(obs.scenario, p));
  }
}
BENCHMARK(BM_VirtualEndpoints);
