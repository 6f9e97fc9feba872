#include <cmath>

#include "artrec/rng.hpp"
#include "artrec/scenario.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace artrec;

TEST_CASE("block grid counts") {
  CHECK(BlockGrid(200.0, 6.0).block_count() == 34);
  CHECK(BlockGrid(60.0, 6.0).block_count() == 10);
  // 260 ft segment ingested as metres, 20 ft resolution.
  const double ft = 0.3048;
  CHECK(BlockGrid(260.0 * ft, 20.0 * ft).block_count() == 13);
  CHECK(BlockGrid(120.0, 6.0).block_count() == 20);
}

TEST_CASE("block grid rejects non-positive arguments") {
  CHECK_THROWS_AS(BlockGrid(0.0, 6.0), InvalidParameterError);
  CHECK_THROWS_AS(BlockGrid(100.0, -1.0), InvalidParameterError);
}

TEST_CASE("position to block") {
  const BlockGrid grid(60.0, 6.0);
  CHECK(grid.block_of(27.0) == 5);
  CHECK(grid.block_of(0.0) == 1);
  CHECK(grid.block_of(60.0) == 10);  // upper boundary clamps to last block
  CHECK(grid.block_of(24.0) == 5);
  CHECK(grid.block_of(23.999999) == 4);
  CHECK_THROWS_AS(grid.block_of(-1.0), OutOfRangeError);
  CHECK_THROWS_AS(grid.block_of(61.0), OutOfRangeError);
}

TEST_CASE("block intervals partition the segment") {
  const BlockGrid grid(200.0, 6.0);
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(0.0, 200.0);
    const int b = grid.block_of(x);
    CHECK(grid.block_start(b) <= x + 1e-9);
    CHECK(x < grid.block_end(b) + 1e-9);
  }
  // Short final block when the length does not divide evenly.
  CHECK(grid.block_end(34) == doctest::Approx(200.0));
  CHECK(grid.block_start(34) == doctest::Approx(198.0));
}

TEST_CASE("lane-change position encoding") {
  const BlockGrid grid10(60.0, 6.0);
  const auto enc = encode_lcp(grid10, 5);
  CHECK(enc == std::vector<double>{0, 0, 0, 0, 1, 0, 0, 0, 0, 0});

  const BlockGrid grid3(18.0, 6.0);
  CHECK(encode_lcp(grid3, 1) == std::vector<double>{1, 0, 0});
  CHECK_THROWS_AS(encode_lcp(grid3, 0), OutOfRangeError);
  CHECK_THROWS_AS(encode_lcp(grid3, 4), OutOfRangeError);

  for (int k = 1; k <= 10; ++k) {
    CHECK(decode_lcp(encode_lcp(grid10, k)) == k);
  }
  // Every encoding sums to one.
  for (int k = 1; k <= 10; ++k) {
    double sum = 0.0;
    for (double v : encode_lcp(grid10, k)) sum += v;
    CHECK(sum == doctest::Approx(1.0));
  }
}

TEST_CASE("signal green windows") {
  const SignalPlan plan(90.0, {{{Movement::kThrough}, 0.0, 40.0}});
  CHECK(plan.is_green(39.0, Movement::kThrough));
  CHECK_FALSE(plan.is_green(40.0, Movement::kThrough));  // half-open window
  CHECK(plan.is_green(129.0, Movement::kThrough));       // modular wrap
  CHECK_FALSE(plan.is_green(130.0, Movement::kThrough));
  CHECK_THROWS_AS(plan.is_green(0.0, Movement::kLeftTurn), InvalidParameterError);

  // Periodicity over arbitrary offsets.
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const double t = rng.uniform(0.0, 90.0);
    CHECK(plan.is_green(t, Movement::kThrough) ==
          plan.is_green(t + 4 * 90.0, Movement::kThrough));
  }
}

TEST_CASE("signal plan validation") {
  CHECK_THROWS_AS(SignalPlan(0.0, {}), InvalidParameterError);
  CHECK_THROWS_AS(SignalPlan(60.0, {{{Movement::kThrough}, 10.0, 5.0}}),
                  InvalidParameterError);
  CHECK_THROWS_AS(SignalPlan(60.0, {{{Movement::kThrough}, 0.0, 61.0}}),
                  InvalidParameterError);
}

TEST_CASE("trajectory invariants enforced on construction") {
  CHECK_THROWS_AS(Trajectory("bad", TrajectoryKind::kGroundTruth,
                             {{0.0, 0.0, 5.0, 1}, {0.0, 1.0, 5.0, 1}}),
                  InvalidParameterError);
  CHECK_THROWS_AS(Trajectory("bad", TrajectoryKind::kGroundTruth,
                             {{0.0, 5.0, 5.0, 1}, {1.0, 4.0, 5.0, 1}}),
                  InvalidParameterError);
  CHECK_THROWS_AS(Trajectory("bad", TrajectoryKind::kGroundTruth,
                             {{0.0, 0.0, -1.0, 1}}),
                  InvalidParameterError);
}

TEST_CASE("trajectory interpolation and crossings") {
  const auto traj = testing::uniform_trajectory("u", 10.0, 0.0, 10.0, 20.0, 1);
  const auto mid = traj.at_time(15.5);
  REQUIRE(mid.has_value());
  CHECK(mid->x == doctest::Approx(55.0));
  CHECK(mid->v == doctest::Approx(10.0));
  CHECK_FALSE(traj.at_time(9.0).has_value());
  CHECK_FALSE(traj.at_time(31.0).has_value());

  const auto cross = traj.crossing_time(100.0);
  REQUIRE(cross.has_value());
  CHECK(*cross == doctest::Approx(20.0));
  CHECK_FALSE(traj.crossing_time(250.0).has_value());
}

TEST_CASE("scenario validation") {
  ScenarioBundle bundle;
  bundle.lanes = testing::two_through_lanes();
  bundle.signal = testing::all_green_signal();
  CHECK_NOTHROW(bundle.validate());

  // Asymmetric adjacency rejected.
  bundle.lanes[1].adjacent.clear();
  CHECK_THROWS_AS(bundle.validate(), InvalidParameterError);
}
