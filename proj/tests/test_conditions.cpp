#include <cmath>

#include "artrec/conditions.hpp"
#include "artrec/rng.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace artrec;

TEST_CASE("safety probability branches") {
  SafetyParams sp;  // accept 12, critical 3, beta0 0, beta1 0.8
  CHECK(safety_probability(sp.accept_gap_m + 10.0, sp) == 1.0);
  CHECK(safety_probability(sp.accept_gap_m, sp) == 1.0);
  CHECK(safety_probability(sp.critical_gap_m, sp) == 0.0);
  CHECK(safety_probability(sp.critical_gap_m - 1.0, sp) == 0.0);
  // Logistic midpoint with zero intercept.
  const double mid = 0.5 * (sp.accept_gap_m + sp.critical_gap_m);
  CHECK(safety_probability(mid, sp) == doctest::Approx(0.5));
}

TEST_CASE("safety probability is monotone in the gap") {
  SafetyParams sp;
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const double g1 = rng.uniform(-5.0, 30.0);
    const double g2 = g1 + rng.uniform(0.0, 10.0);
    CHECK(safety_probability(g2, sp) >= safety_probability(g1, sp));
  }
}

TEST_CASE("safety condition over blocks") {
  SafetyParams sp;
  IdmParams p;
  p.vehicle_length = 4.5;
  const BlockGrid grid(60.0, 6.0);
  const auto hyp = testing::uniform_trajectory("h", 0.0, 0.0, 10.0, 6.0, 1,
                                               1.0, TrajectoryKind::kHypothetical);

  SUBCASE("empty target lane is fully feasible") {
    const auto seq = safety_condition(hyp, {}, grid, sp, p);
    for (double v : seq) CHECK(v == 1.0);
  }

  SUBCASE("close preceding vehicle blocks, distant one does not") {
    // Parked vehicle at 30 m: as the path approaches it the gap shrinks
    // below critical.
    const auto parked = testing::stopped_trajectory("s", 0.0, 30.0, 10.0, 2);
    const auto seq = safety_condition(hyp, {&parked}, grid, sp, p);
    // Block 5 starts at 24; gap = 30 - 24 - 4.5 = 1.5 < critical 3.
    CHECK(seq[4] == 0.0);
    // Block 1 starts at 0; gap = 25.5 >= 12 -> fully feasible.
    CHECK(seq[0] == 1.0);
    // Blocks past the parked car see nothing ahead.
    CHECK(seq[6] == 1.0);
  }
}

TEST_CASE("signal condition from the queue profile") {
  IdmParams p;
  const BlockGrid grid(60.0, 6.0);
  const auto hyp = testing::uniform_trajectory("h", 0.0, 0.0, 10.0, 6.0, 1,
                                               1.0, TrajectoryKind::kHypothetical);

  SUBCASE("lane that never queues is all ones") {
    const auto moving = testing::uniform_trajectory("m", 0.0, 0.0, 8.0, 8.0, 1);
    const auto profile = queue_profile({&moving}, grid, 0.0, 10, p);
    const auto seq = signal_condition(profile, hyp, grid);
    for (double v : seq) CHECK(v == 1.0);
  }

  SUBCASE("standing queue blocks are zero at their inherited times") {
    const auto stopped = testing::stopped_trajectory("s", 0.0, 45.0, 10.0, 1);
    const auto profile = queue_profile({&stopped}, grid, 0.0, 10, p);
    const auto seq = signal_condition(profile, hyp, grid);
    const int b = grid.block_of(45.0);
    CHECK(seq[b - 1] == 0.0);
    CHECK(seq[0] == 1.0);
  }

  SUBCASE("dissipated block is feasible again") {
    // Occupant stopped at 45 until t=2, then gone (resumed).
    std::vector<TrajectorySample> samples;
    samples.push_back({0.0, 45.0, 0.0, 1});
    samples.push_back({2.0, 45.0, 0.0, 1});
    samples.push_back({3.0, 47.0, 3.0, 1});
    samples.push_back({6.0, 60.0, 6.0, 1});
    const Trajectory occupant("o", TrajectoryKind::kGroundTruth, samples);
    const auto profile = queue_profile({&occupant}, grid, 0.0, 10, p);
    // The path enters block 8 ([42,48)) at t=4.2, after the resume.
    const auto seq = signal_condition(profile, hyp, grid);
    CHECK(seq[7] == 1.0);
    CHECK(profile.at(1.0, 8) == QueueState::kStationary);
    CHECK(profile.at(4.2, 8) == QueueState::kDissipating);
  }
}

TEST_CASE("lane pair vocabulary") {
  const auto lanes2 = testing::two_through_lanes();
  const LanePairVocab vocab2(lanes2);
  CHECK(vocab2.size() == 2);

  std::vector<LaneGeometry> lanes3 = {
      {1, Movement::kLeftTurn, 120.0, {2}},
      {2, Movement::kThrough, 120.0, {1, 3}},
      {3, Movement::kThrough, 120.0, {2}},
  };
  const LanePairVocab vocab3(lanes3);
  CHECK(vocab3.size() == 4);  // adjacent ordered pairs
  const LanePairVocab vocab3s(lanes3, /*include_non_adjacent=*/true);
  CHECK(vocab3s.size() == 6);  // +2 secondary pairs

  // Distinct one-hots for the two directions of a pair.
  CHECK(vocab3.one_hot(1, 2) != vocab3.one_hot(2, 1));
  CHECK_THROWS_AS(vocab3.index_of(1, 3), OutOfRangeError);
  CHECK_NOTHROW(vocab3s.index_of(1, 3));
}

TEST_CASE("geo embedding shape and application") {
  const int vocab = 4, blocks = 10;
  std::vector<double> embedding(vocab * blocks);
  for (int i = 0; i < vocab * blocks; ++i) embedding[i] = 0.01 * i;
  std::vector<double> one_hot(vocab, 0.0);
  one_hot[2] = 1.0;
  const auto seq = embed_geo(embedding, vocab, blocks, one_hot);
  REQUIRE(seq.size() == 10);
  for (int s = 0; s < blocks; ++s)
    CHECK(seq[s] == doctest::Approx(0.01 * (2 * blocks + s)));
  CHECK_THROWS_AS(embed_geo(embedding, vocab, blocks + 1, one_hot),
                  InvalidParameterError);
}

TEST_CASE("condition concatenation order and round trip") {
  const int s = 10;
  ConditionBundle b;
  for (int i = 0; i < s; ++i) {
    b.safety.push_back(0.1 * i);
    b.signal_origin.push_back(i % 2);
    b.signal_target.push_back(1.0);
    b.geo.push_back(-0.5 + 0.05 * i);
  }
  const auto c = b.concat();
  REQUIRE(c.size() == 40);
  CHECK(c[0] == doctest::Approx(b.safety[0]));
  CHECK(c[10] == doctest::Approx(b.signal_origin[0]));
  CHECK(c[20] == doctest::Approx(b.signal_target[0]));
  CHECK(c[30] == doctest::Approx(b.geo[0]));

  const auto split = split_conditions(c);
  CHECK(split.safety == b.safety);
  CHECK(split.signal_origin == b.signal_origin);
  CHECK(split.signal_target == b.signal_target);
  CHECK(split.geo == b.geo);

  // Study-area scale: 34 blocks concatenate to 136.
  ConditionBundle wide;
  wide.safety.assign(34, 1.0);
  wide.signal_origin.assign(34, 1.0);
  wide.signal_target.assign(34, 1.0);
  wide.geo.assign(34, 0.0);
  CHECK(wide.concat().size() == 136);

  ConditionBundle bad = b;
  bad.geo.pop_back();
  CHECK_THROWS_AS(bad.concat(), InvalidParameterError);
}

TEST_CASE("lane change type classification") {
  std::vector<LaneGeometry> lanes = {
      {1, Movement::kLeftTurn, 120.0, {2}},
      {2, Movement::kThrough, 120.0, {1, 3}},
      {3, Movement::kThrough, 120.0, {2}},
      {4, Movement::kRightTurn, 120.0, {3}},
  };
  CHECK(classify_lc_type(2, 1, lanes) == LcType::kMandatory);
  CHECK(classify_lc_type(2, 3, lanes) == LcType::kDiscretionary);
  CHECK(classify_lc_type(4, 3, lanes) == LcType::kMandatory);
}
