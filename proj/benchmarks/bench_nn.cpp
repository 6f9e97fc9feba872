#include <benchmark/benchmark.h>

#include "artrec/traj_gan.hpp"

using namespace artrec;

namespace {

TrajGanConfig bench_config() {
  TrajGanConfig cfg;
  cfg.steps = 75;
  cfg.segment_length = 120.0;
  cfg.seed = 7;
  return cfg;
}

TrajSequence bench_condition(const TrajGanConfig& cfg) {
  std::vector<TrajectorySample> samples;
  for (int k = 0; k <= cfg.steps; ++k)
    samples.push_back({static_cast<double>(k), std::min(120.0, 9.0 * k),
                       9.0, 1});
  const Trajectory traj("c", TrajectoryKind::kHypothetical, samples);
  return resample_to_sequence(traj, 0.0, cfg.dt, cfg.steps, cfg.segment_length);
}

}  // namespace

static void BM_TrajGeneratorForward(benchmark::State& state) {
  const auto cfg = bench_config();
  TrajGenerator gen(cfg);
  const auto cond = bench_condition(cfg);
  Rng rng(5);
  std::vector<double> z(cfg.steps);
  for (auto& v : z) v = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen.forward(z, cond, false, nullptr));
  }
}
BENCHMARK(BM_TrajGeneratorForward);

static void BM_TrajGeneratorBackward(benchmark::State& state) {
  const auto cfg = bench_config();
  TrajGenerator gen(cfg);
  const auto cond = bench_condition(cfg);
  Rng rng(5);
  std::vector<double> z(cfg.steps);
  for (auto& v : z) v = rng.normal();
  std::vector<double> grad(cfg.steps, 0.01);
  for (auto _ : state) {
    TrajGenCache cache;
    gen.forward(z, cond, true, &cache);
    nn::NetworkGrads grads = gen.network().zero_grads();
    gen.backward(cache, grad, &grads, nullptr);
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(BM_TrajGeneratorBackward);
