#include <cmath>

#include "artrec/lc_gan.hpp"
#include "artrec/rng.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace artrec;

namespace {

LcGanConfig small_config() {
  LcGanConfig cfg;
  cfg.blocks = 10;
  cfg.pair_vocab = 2;
  cfg.conv_channels = {8, 12, 8};
  cfg.seed = 77;
  return cfg;
}

LcInput random_input(const LcGanConfig& cfg, Rng& rng) {
  LcInput in;
  for (int i = 0; i < cfg.blocks; ++i) {
    in.safety.push_back(rng.uniform());
    in.signal_origin.push_back(rng.uniform() < 0.5 ? 0.0 : 1.0);
    in.signal_target.push_back(rng.uniform() < 0.5 ? 0.0 : 1.0);
  }
  in.geo_onehot.assign(cfg.pair_vocab, 0.0);
  in.geo_onehot[rng.uniform_int(0, cfg.pair_vocab - 1)] = 1.0;
  return in;
}

std::vector<double> random_noise(int n, Rng& rng) {
  std::vector<double> z(n);
  for (auto& v : z) v = rng.normal();
  return z;
}

}  // namespace

TEST_CASE("generator output is a probability distribution") {
  const auto cfg = small_config();
  LcGenerator gen(cfg);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = random_input(cfg, rng);
    const auto z = random_noise(cfg.blocks, rng);
    const auto dist = gen.forward(z, in, false, nullptr);
    REQUIRE(static_cast<int>(dist.size()) == cfg.blocks);
    double sum = 0.0;
    for (double p : dist) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("generator is deterministic and varies with noise") {
  const auto cfg = small_config();
  LcGenerator gen(cfg);
  Rng rng(5);
  const auto in = random_input(cfg, rng);
  const auto z = random_noise(cfg.blocks, rng);
  const auto a = gen.forward(z, in, false, nullptr);
  const auto b = gen.forward(z, in, false, nullptr);
  CHECK(a == b);

  // Non-collapse at initialization: variance over 32 draws is non-zero.
  double var = 0.0;
  std::vector<double> mean(cfg.blocks, 0.0);
  std::vector<std::vector<double>> draws;
  for (int d = 0; d < 32; ++d) {
    draws.push_back(gen.forward(random_noise(cfg.blocks, rng), in, false, nullptr));
    for (int i = 0; i < cfg.blocks; ++i) mean[i] += draws.back()[i] / 32.0;
  }
  for (const auto& dr : draws)
    for (int i = 0; i < cfg.blocks; ++i)
      var += (dr[i] - mean[i]) * (dr[i] - mean[i]);
  CHECK(var > 0.0);
}

TEST_CASE("discriminator score bounded in (0,1)") {
  const auto cfg = small_config();
  LcGenerator gen(cfg);
  LcDiscriminator disc(cfg);
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = random_input(cfg, rng);
    const auto z = random_noise(cfg.blocks, rng);
    const auto dist = gen.forward(z, in, false, nullptr);
    const auto c = gen.conditions(in);
    const double s = disc.forward(dist, c, false, nullptr);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
}

TEST_CASE("loss identities") {
  // Perfect-discriminator, perfect-generator limits evaluate to zero.
  const std::vector<std::vector<double>> rm = {{0, 0, 1, 0}};
  SUBCASE("perfect limits") {
    CHECK(loss_lcd({0.0}, {0.0}, {1.0}, rm, rm, 1.0) == 0.0);
    CHECK(loss_lcg({1.0}) == 0.0);
  }
  SUBCASE("analytic half-score case") {
    CHECK(loss_lcd({0.5}, {0.5}, {0.5}, rm, rm, 1.0) ==
          doctest::Approx(-3.0 * std::log(2.0)));
    CHECK(loss_lcg({0.5}) == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("uniform-vs-one-hot squared error") {
    std::vector<std::vector<double>> one_hot = {
        {0, 0, 0, 0, 1, 0, 0, 0, 0, 0}};
    std::vector<std::vector<double>> uniform = {
        std::vector<double>(10, 0.1)};
    CHECK(lc_reconstruction_mse(one_hot, uniform) == doctest::Approx(0.9));
    // omega scales the reconstruction term inside the composite loss.
    const double composite =
        loss_lcd({0.0}, {0.0}, {1.0}, one_hot, uniform, 2.0);
    CHECK(composite == doctest::Approx(-2.0 * 0.9));
  }
  SUBCASE("generator loss decreases in the score") {
    CHECK(loss_lcg({0.3}) > loss_lcg({0.6}));
    CHECK(loss_lcg({0.6}) > loss_lcg({0.9}));
  }
}

TEST_CASE("block selection") {
  CHECK(select_lcp({0.1, 0.7, 0.2}) == 2);
  CHECK(select_lcp(std::vector<double>(10, 0.1)) == 1);  // ties take lowest
  for (int k = 1; k <= 10; ++k) {
    std::vector<double> one_hot(10, 0.0);
    one_hot[k - 1] = 1.0;
    CHECK(select_lcp(one_hot) == k);
  }
  // Invariant under positive rescaling of the pre-softmax logits: feed
  // scaled logits through a softmax by hand.
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> logits(8);
    for (auto& v : logits) v = rng.uniform(-2.0, 2.0);
    auto softmax = [](std::vector<double> x) {
      double mx = x[0];
      for (double v : x) mx = std::max(mx, v);
      double sum = 0.0;
      for (auto& v : x) {
        v = std::exp(v - mx);
        sum += v;
      }
      for (auto& v : x) v /= sum;
      return x;
    };
    auto scaled = logits;
    for (auto& v : scaled) v *= 3.7;
    CHECK(select_lcp(softmax(logits)) == select_lcp(softmax(scaled)));
  }
}

TEST_CASE("initial trajectory splice") {
  const BlockGrid grid(120.0, 6.0);
  IdmParams p;
  p.desired_speed = 10.0;
  LaneGeometry origin{1, Movement::kThrough, 120.0, {2}};
  LaneGeometry target{2, Movement::kThrough, 120.0, {1}};
  const auto signal = testing::all_green_signal();

  SUBCASE("identical hypotheticals reproduce the path") {
    const auto hyp_o =
        generate_hypothetical_trajectory(0.0, origin, nullptr, signal, p);
    auto samples = hyp_o.samples();
    for (auto& s : samples) s.lane = 2;
    const Trajectory hyp_t("t", TrajectoryKind::kHypothetical, samples);
    const auto spliced = assemble_initial_lc_trajectory(hyp_o, hyp_t, 5, grid);
    for (const auto& s : spliced.trajectory.samples()) {
      const auto ref = hyp_o.at_time(s.t);
      REQUIRE(ref.has_value());
      CHECK(s.x == doctest::Approx(ref->x).epsilon(1e-9));
    }
    CHECK(spliced.event.lc_block == 5);
    CHECK(spliced.event.origin_lane == 1);
    CHECK(spliced.event.target_lane == 2);
  }

  SUBCASE("lane labels flip at the splice position") {
    const auto hyp_o =
        generate_hypothetical_trajectory(0.0, origin, nullptr, signal, p);
    // Slower target-lane path behind a leader.
    const auto lead = testing::uniform_trajectory("lead", 0.0, 30.0, 7.0, 30.0, 2);
    const auto hyp_t = generate_hypothetical_trajectory(
        0.0, target, &lead, signal, p, "hyp_t", LeaderEnd::kDeparts);
    const int block = 4;
    const auto spliced =
        assemble_initial_lc_trajectory(hyp_o, hyp_t, block, grid);
    const double splice_x = grid.block_start(block);
    for (const auto& s : spliced.trajectory.samples()) {
      if (s.x < splice_x - 1e-9) CHECK(s.lane == 1);
      if (s.x > splice_x + 1e-9) CHECK(s.lane == 2);
    }
    // Monotone and position-continuous at the stitch by construction.
    const auto& samples = spliced.trajectory.samples();
    for (std::size_t i = 1; i < samples.size(); ++i) {
      CHECK(samples[i].x >= samples[i - 1].x);
      CHECK(samples[i].t > samples[i - 1].t);
    }
  }

  SUBCASE("last-block splice keeps the origin path except the tail") {
    const auto hyp_o =
        generate_hypothetical_trajectory(0.0, origin, nullptr, signal, p);
    auto samples = hyp_o.samples();
    for (auto& s : samples) s.lane = 2;
    const Trajectory hyp_t("t", TrajectoryKind::kHypothetical, samples);
    const int s_blocks = grid.block_count();
    const auto spliced =
        assemble_initial_lc_trajectory(hyp_o, hyp_t, s_blocks, grid);
    const double splice_x = grid.block_start(s_blocks);
    // Everything before the final block's entry comes from the origin.
    for (const auto& s : spliced.trajectory.samples()) {
      if (s.x < splice_x - 1e-9) CHECK(s.lane == 1);
    }
    CHECK(spliced.trajectory.back().x == doctest::Approx(120.0));
  }

  SUBCASE("unreachable splice position is an error") {
    const auto hyp_o =
        generate_hypothetical_trajectory(0.0, origin, nullptr, signal, p);
    // Target path permanently parked near the entrance.
    const auto hyp_t = testing::stopped_trajectory("t", 0.0, 5.0, 40.0, 2);
    CHECK_THROWS_AS(assemble_initial_lc_trajectory(hyp_o, hyp_t, 8, grid),
                    SpliceInfeasibleError);
  }
}

TEST_CASE("geo embedding gradient routing") {
  const auto cfg = small_config();
  LcGenerator gen(cfg);
  Rng rng(41);
  const auto in = random_input(cfg, rng);
  const auto z = random_noise(cfg.blocks, rng);
  LcGenCache cache;
  const auto dist = gen.forward(z, in, true, &cache);

  nn::NetworkGrads grads = gen.network().zero_grads();
  nn::NumArray emb_grad = nn::NumArray::zeros_like(gen.geo_embedding());
  std::vector<double> d_dist(cfg.blocks, 0.0);
  d_dist[3] = 1.0;
  gen.backward(cache, d_dist, &grads, &emb_grad);

  // Only the active vocabulary row receives gradient.
  int active = -1;
  for (int v = 0; v < cfg.pair_vocab; ++v)
    if (in.geo_onehot[v] == 1.0) active = v;
  REQUIRE(active >= 0);
  double active_norm = 0.0, inactive_norm = 0.0;
  for (int v = 0; v < cfg.pair_vocab; ++v) {
    for (int s = 0; s < cfg.blocks; ++s) {
      const double g = emb_grad[v * cfg.blocks + s];
      (v == active ? active_norm : inactive_norm) += g * g;
    }
  }
  CHECK(active_norm > 0.0);
  CHECK(inactive_norm == 0.0);
}
