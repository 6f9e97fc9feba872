#include <cmath>

#include "artrec/rng.hpp"
#include "artrec/traj_gan.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace artrec;

namespace {

TrajGanConfig small_config() {
  TrajGanConfig cfg;
  cfg.steps = 40;
  cfg.dt = 1.0;
  cfg.segment_length = 120.0;
  cfg.max_step_fraction = 0.12;
  cfg.hidden = 8;
  cfg.conv_channels = 8;
  cfg.seed = 13;
  return cfg;
}

std::vector<double> random_noise(int n, Rng& rng) {
  std::vector<double> z(n);
  for (auto& v : z) v = rng.normal();
  return z;
}

}  // namespace

TEST_CASE("resampling onto the sequence convention") {
  const auto traj = testing::uniform_trajectory("u", 5.0, 0.0, 10.0, 12.0, 1);
  const auto seq = resample_to_sequence(traj, 5.0, 1.0, 20, 120.0);
  REQUIRE(seq.steps() == 20);
  CHECK(seq.values[0] == doctest::Approx(0.0));
  CHECK(seq.values[6] == doctest::Approx(0.5));   // 60 m of 120
  CHECK(seq.values[12] == doctest::Approx(1.0));  // reached the stop line
  CHECK(seq.exit_step == 12);
  CHECK(seq.values[19] == doctest::Approx(1.0));  // clamped after exit

  // Round trip at grid-aligned timestamps.
  for (const auto& s : traj.samples()) {
    const int k = static_cast<int>(std::lround((s.t - 5.0) / 1.0));
    if (k < 0 || k >= seq.steps()) continue;
    CHECK(seq.values[k] * 120.0 == doctest::Approx(s.x).epsilon(1e-9));
  }

  // Conversion back to a trajectory preserves positions on the window.
  const auto back = sequence_to_trajectory(seq, "b", TrajectoryKind::kHvReconstructed, 1);
  for (const auto& s : back.samples()) {
    const auto ref = traj.at_time(s.t);
    REQUIRE(ref.has_value());
    CHECK(s.x == doctest::Approx(ref->x).epsilon(1e-9));
  }
}

TEST_CASE("generator output shape, monotonicity and bounds") {
  const auto cfg = small_config();
  TrajGenerator gen(cfg);
  Rng rng(7);
  const auto base = testing::uniform_trajectory("c", 0.0, 0.0, 8.0, 20.0, 1);
  const auto cond = resample_to_sequence(base, 0.0, cfg.dt, cfg.steps,
                                         cfg.segment_length);
  for (int trial = 0; trial < 10; ++trial) {
    const auto out =
        gen.forward(random_noise(cfg.steps, rng), cond, false, nullptr);
    REQUIRE(out.steps() == cfg.steps);
    CHECK(out.values[0] == 0.0);  // entry anchored at the segment origin
    for (int k = 1; k < out.steps(); ++k) {
      CHECK(out.values[k] >= out.values[k - 1]);
      CHECK(out.values[k] <= 1.0 + 1e-12);
      // Per-step increment bounded by the squash scale.
      CHECK(out.values[k] - out.values[k - 1] <=
            cfg.max_step_fraction + 1e-12);
    }
  }
}

TEST_CASE("generator determinism under a fixed seed") {
  const auto cfg = small_config();
  TrajGenerator a(cfg), b(cfg);
  Rng rng(11);
  const auto base = testing::uniform_trajectory("c", 0.0, 0.0, 9.0, 15.0, 1);
  const auto cond = resample_to_sequence(base, 0.0, cfg.dt, cfg.steps,
                                         cfg.segment_length);
  const auto z = random_noise(cfg.steps, rng);
  const auto out_a = a.forward(z, cond, false, nullptr);
  const auto out_b = b.forward(z, cond, false, nullptr);
  CHECK(out_a.values == out_b.values);
}

TEST_CASE("discriminator bounded and mirrors the generator input layout") {
  const auto cfg = small_config();
  TrajGenerator gen(cfg);
  TrajDiscriminator disc(cfg);
  Rng rng(19);
  const auto base = testing::uniform_trajectory("c", 0.0, 0.0, 8.0, 20.0, 1);
  const auto cond = resample_to_sequence(base, 0.0, cfg.dt, cfg.steps,
                                         cfg.segment_length);
  for (int trial = 0; trial < 10; ++trial) {
    const auto gm =
        gen.forward(random_noise(cfg.steps, rng), cond, false, nullptr);
    const double s = disc.forward(gm, cond, false, nullptr);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
}

TEST_CASE("masked reconstruction error") {
  // Constant 0.1 difference over 50 in-segment steps sums to 0.5.
  TrajSequence rm, gm;
  rm.segment_length = gm.segment_length = 120.0;
  const int steps = 60;
  for (int k = 0; k < steps; ++k) {
    const double ramp = k < 50 ? 0.1 + 0.88 * k / 49.0 : 1.0;
    rm.values.push_back(std::min(ramp, 1.0));
    gm.values.push_back(k < 50 ? rm.values[k] - 0.1 : 1.0);
  }
  rm.exit_step = TrajSequence::compute_exit(rm.values);
  gm.exit_step = TrajSequence::compute_exit(gm.values);
  REQUIRE(rm.exit_step == 50);
  CHECK(traj_reconstruction_mse({rm}, {gm}) == doctest::Approx(0.5));
}

TEST_CASE("trajectory loss identities") {
  TrajSequence rm;
  rm.segment_length = 120.0;
  rm.values = {0.0, 0.3, 0.6, 0.9, 1.0};
  rm.exit_step = TrajSequence::compute_exit(rm.values);
  SUBCASE("perfect limits are zero") {
    CHECK(loss_trajd({0.0}, {0.0}, {1.0}, {rm}, {rm}, 1.0) == 0.0);
    CHECK(loss_trajg({1.0}) == 0.0);
  }
  SUBCASE("half-score analytic case") {
    CHECK(loss_trajg({0.5}) == doctest::Approx(std::log(2.0)));
    CHECK(loss_trajd({0.5}, {0.5}, {0.5}, {rm}, {rm}, 1.0) ==
          doctest::Approx(-3.0 * std::log(2.0)));
  }
}

TEST_CASE("leader-gap projection") {
  TrajSequence refined;
  refined.window_start = 0.0;
  refined.dt = 1.0;
  refined.segment_length = 100.0;
  for (int k = 0; k < 20; ++k)
    refined.values.push_back(std::min(1.0, 0.08 * k));
  refined.exit_step = TrajSequence::compute_exit(refined.values);

  // Leader crawling ahead: caps the refined positions at spacing behind.
  const auto leader = testing::uniform_trajectory("ld", 0.0, 10.0, 2.0, 25.0, 1);
  const auto projected = project_leader_feasible(refined, leader, 6.0);
  for (int k = 0; k < projected.steps(); ++k) {
    const auto s = leader.at_time(projected.time_of(k));
    if (!s.has_value()) continue;
    CHECK(projected.values[k] * 100.0 <= s->x - 6.0 + 1e-9);
    if (k > 0) CHECK(projected.values[k] >= projected.values[k - 1] - 1e-12);
  }
}

TEST_CASE("splice mixture is the convex combination of candidates") {
  SpliceMixture mix;
  const int steps = 10;
  for (int c = 0; c < 3; ++c) {
    TrajSequence cand;
    cand.segment_length = 100.0;
    for (int k = 0; k < steps; ++k)
      cand.values.push_back(std::min(1.0, 0.05 * (c + 1) * k));
    cand.exit_step = TrajSequence::compute_exit(cand.values);
    mix.candidates.push_back(cand);
  }
  const std::vector<double> dist = {0.2, 0.5, 0.3};
  const auto blended = mix.mix(dist);
  for (int k = 0; k < steps; ++k) {
    double expect = 0.0;
    for (int c = 0; c < 3; ++c) expect += dist[c] * mix.candidates[c].values[k];
    CHECK(blended.values[k] == doctest::Approx(expect));
  }
  // Gradient is the per-candidate inner product.
  std::vector<double> g(steps, 0.0);
  g[4] = 1.0;
  const auto d_dist = mix.grad_distribution(g);
  for (int c = 0; c < 3; ++c)
    CHECK(d_dist[c] == doctest::Approx(mix.candidates[c].values[4]));
}

TEST_CASE("generator backward matches finite differences through the head") {
  // End-to-end check: loss = sum(c .* values) differentiated through the
  // clamp, prefix sum, squash and the recurrent stack.
  auto cfg = small_config();
  cfg.steps = 12;
  cfg.hidden = 4;
  TrajGenerator gen(cfg);
  Rng rng(101);
  const auto base = testing::uniform_trajectory("c", 0.0, 0.0, 9.0, 15.0, 1);
  const auto cond = resample_to_sequence(base, 0.0, cfg.dt, cfg.steps,
                                         cfg.segment_length);
  const auto z = random_noise(cfg.steps, rng);
  std::vector<double> c(cfg.steps);
  for (auto& v : c) v = rng.uniform(-1.0, 1.0);

  TrajGenCache cache;
  const auto out = gen.forward(z, cond, true, &cache);
  nn::NetworkGrads grads = gen.network().zero_grads();
  std::vector<double> grad_cond;
  gen.backward(cache, c, &grads, &grad_cond);

  auto loss_of = [&](TrajGenerator& g) {
    const auto o = g.forward(z, cond, true, nullptr);
    double acc = 0.0;
    for (int k = 0; k < cfg.steps; ++k) acc += c[k] * o.values[k];
    return acc;
  };
  const double eps = 1e-6;
  double max_err = 0.0;
  auto& tensors = gen.network().params();
  for (std::size_t l = 0; l < tensors.size(); ++l) {
    for (std::size_t t = 0; t < tensors[l].tensors.size(); ++t) {
      auto& tensor = tensors[l].tensors[t];
      for (std::size_t j = 0; j < tensor.size(); j += 7) {  // sample sparsely
        const double orig = tensor[j];
        tensor[j] = orig + eps;
        const double hi = loss_of(gen);
        tensor[j] = orig - eps;
        const double lo = loss_of(gen);
        tensor[j] = orig;
        const double numeric = (hi - lo) / (2.0 * eps);
        const double analytic = grads.layers[l][t][j];
        if (std::max(std::abs(analytic), std::abs(numeric)) < 1e-7)
          continue;  // exactly-zero gradients (bias under batchnorm)
        const double err = std::abs(analytic - numeric) /
                           std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        max_err = std::max(max_err, err);
      }
    }
  }
  CHECK(max_err <= 2e-4);

  // Condition-input gradient against finite differences.
  for (int k = 0; k < cfg.steps; k += 3) {
    TrajSequence hi = cond, lo = cond;
    hi.values[k] += eps;
    lo.values[k] -= eps;
    const auto out_hi = gen.forward(z, hi, true, nullptr);
    const auto out_lo = gen.forward(z, lo, true, nullptr);
    double l_hi = 0.0, l_lo = 0.0;
    for (int i = 0; i < cfg.steps; ++i) {
      l_hi += c[i] * out_hi.values[i];
      l_lo += c[i] * out_lo.values[i];
    }
    const double numeric = (l_hi - l_lo) / (2.0 * eps);
    const double err = std::abs(grad_cond[k] - numeric) /
                       std::max({std::abs(grad_cond[k]), std::abs(numeric), 1e-6});
    CHECK(err <= 2e-4);
  }
}
