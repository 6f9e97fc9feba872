#include <benchmark/benchmark.h>

#include "artrec/physics.hpp"

using namespace artrec;

static void BM_IdmAcceleration(benchmark::State& state) {
  IdmParams p;
  VehicleState lag{0.0, 50.0, 8.0};
  VehicleState lead{0.0, 80.0, 7.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(idm_acceleration(lag, lead, p));
  }
}
BENCHMARK(BM_IdmAcceleration);

static void BM_HypotheticalTrajectory(benchmark::State& state) {
  IdmParams p;
  LaneGeometry lane{1, Movement::kThrough, 120.0, {}};
  const SignalPlan signal(60.0, {{{Movement::kThrough}, 45.0, 60.0}});
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        generate_hypothetical_trajectory(3.0, lane, nullptr, signal, p));
  }
}
BENCHMARK(BM_HypotheticalTrajectory);

static void BM_QueueProfile(benchmark::State& state) {
  IdmParams p;
  LaneGeometry lane{1, Movement::kThrough, 120.0, {}};
  const SignalPlan signal(60.0, {{{Movement::kThrough}, 45.0, 60.0}});
  const BlockGrid grid(120.0, 6.0);
  std::vector<Trajectory> platoon;
  for (int i = 0; i < 6; ++i) {
    const Trajectory* leader = i == 0 ? nullptr : &platoon.back();
    platoon.push_back(generate_hypothetical_trajectory(3.0 * i, lane, leader,
                                                       signal, p));
  }
  std::vector<const Trajectory*> ptrs;
  for (const auto& t : platoon) ptrs.push_back(&t);
  for (auto _ : state) {
    benchmark::DoNotOptimize(queue_profile(ptrs, grid, 0.0, 90, p));
  }
}
BENCHMARK(BM_QueueProfile);

BENCHMARK_MAIN();
