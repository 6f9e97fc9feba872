#include "artrec/lc_gan.hpp"

#include <algorithm>
#include <cmath>

namespace artrec {

namespace {

std::vector<nn::LayerSpec> generator_specs(const LcGanConfig& cfg) {
  std::vector<nn::LayerSpec> specs;
  int in_ch = 5;  // noise + safety + signal_o + signal_t + geo
  for (int ch : cfg.conv_channels) {
    nn::LayerSpec conv;
    conv.kind = nn::LayerKind::kConv1d;
    conv.in_channels = in_ch;
    conv.out_channels = ch;
    conv.kernel = cfg.kernel;
    specs.push_back(conv);
    nn::LayerSpec bn;
    bn.kind = nn::LayerKind::kBatchNorm;
    bn.features = ch;
    specs.push_back(bn);
    nn::LayerSpec act;
    act.kind = nn::LayerKind::kLeakyRelu;
    act.slope = cfg.leak;
    specs.push_back(act);
    in_ch = ch;
  }
  nn::LayerSpec head;
  head.kind = nn::LayerKind::kConv1d;
  head.in_channels = in_ch;
  head.out_channels = 1;
  head.kernel = cfg.kernel;
  specs.push_back(head);
  nn::LayerSpec softmax;
  softmax.kind = nn::LayerKind::kSoftmax;
  specs.push_back(softmax);
  return specs;
}

std::vector<nn::LayerSpec> discriminator_specs(const LcGanConfig& cfg) {
  std::vector<nn::LayerSpec> specs;
  int in_ch = 5;  // distribution + four condition rows
  bool first = true;
  for (int ch : cfg.conv_channels) {
    nn::LayerSpec conv;
    conv.kind = nn::LayerKind::kConv1d;
    conv.in_channels = in_ch;
    conv.out_channels = ch;
    conv.kernel = cfg.kernel;
    specs.push_back(conv);
    if (!first) {
      nn::LayerSpec bn;
      bn.kind = nn::LayerKind::kBatchNorm;
      bn.features = ch;
      specs.push_back(bn);
    }
    nn::LayerSpec act;
    act.kind = nn::LayerKind::kLeakyRelu;
    act.slope = cfg.leak;
    specs.push_back(act);
    in_ch = ch;
    first = false;
  }
  nn::LayerSpec pool;
  pool.kind = nn::LayerKind::kMeanPool;
  specs.push_back(pool);
  nn::LayerSpec dense;
  dense.kind = nn::LayerKind::kDense;
  dense.in_features = in_ch;
  dense.out_features = 1;
  specs.push_back(dense);
  nn::LayerSpec squash;
  squash.kind = nn::LayerKind::kSigmoid;
  specs.push_back(squash);
  return specs;
}

void check_lengths(const LcGanConfig& cfg, const LcInput& cond) {
  const auto s = static_cast<std::size_t>(cfg.blocks);
  if (cond.safety.size() != s || cond.signal_origin.size() != s ||
      cond.signal_target.size() != s ||
      cond.geo_onehot.size() != static_cast<std::size_t>(cfg.pair_vocab))
    throw InvalidParameterError("condition sequence lengths do not match config");
}

}  // namespace

LcGenerator::LcGenerator(const LcGanConfig& cfg)
    : cfg_(cfg),
      geo_embedding_({cfg.pair_vocab, cfg.blocks}),
      net_(generator_specs(cfg), cfg.seed) {
  Rng rng(Rng(cfg.seed).fork(0xEE0).seed());
  const double bound = std::sqrt(1.0 / std::max(1, cfg.pair_vocab));
  geo_embedding_.fill_uniform(rng, -bound, bound);
}

std::vector<double> LcGenerator::geo_sequence(const std::vector<double>& one_hot) const {
  return embed_geo(geo_embedding_.values(), cfg_.pair_vocab, cfg_.blocks, one_hot);
}

std::vector<double> LcGenerator::conditions(const LcInput& cond) const {
  check_lengths(cfg_, cond);
  ConditionBundle b;
  b.safety = cond.safety;
  b.signal_origin = cond.signal_origin;
  b.signal_target = cond.signal_target;
  b.geo = geo_sequence(cond.geo_onehot);
  return b.concat();
}

std::vector<double> LcGenerator::forward(const std::vector<double>& z,
                                         const LcInput& cond, bool training,
                                         LcGenCache* cache) {
  check_lengths(cfg_, cond);
  const int s = cfg_.blocks;
  if (z.size() != static_cast<std::size_t>(s))
    throw InvalidParameterError("noise length does not match block count");
  nn::NumArray input({5, s});
  const auto geo = geo_sequence(cond.geo_onehot);
  for (int i = 0; i < s; ++i) {
    input[0 * s + i] = z[i];
    input[1 * s + i] = cond.safety[i];
    input[2 * s + i] = cond.signal_origin[i];
    input[3 * s + i] = cond.signal_target[i];
    input[4 * s + i] = geo[i];
  }
  nn::NumArray out =
      net_.forward(input, training, cache ? &cache->net : nullptr);
  if (cache) {
    cache->input = input;
    cache->geo_onehot = cond.geo_onehot;
  }
  return out.values();
}

void LcGenerator::backward(const LcGenCache& cache,
                           const std::vector<double>& grad_dist,
                           nn::NetworkGrads* net_grads,
                           nn::NumArray* embedding_grad) const {
  const int s = cfg_.blocks;
  nn::NumArray g({1, s}, grad_dist);
  nn::NumArray din = net_.backward(cache.net, g, net_grads);
  if (embedding_grad != nullptr) {
    std::vector<double> grad_geo(din.data() + 4 * s, din.data() + 5 * s);
    accumulate_embedding_grad(cache.geo_onehot, grad_geo, embedding_grad);
  }
}

void LcGenerator::accumulate_embedding_grad(const std::vector<double>& one_hot,
                                            const std::vector<double>& grad_geo_seq,
                                            nn::NumArray* embedding_grad) {
  const std::size_t vocab = one_hot.size();
  const std::size_t s = grad_geo_seq.size();
  if (embedding_grad->size() != vocab * s)
    throw InvalidParameterError("embedding gradient shape mismatch");
  for (std::size_t v = 0; v < vocab; ++v) {
    if (one_hot[v] == 0.0) continue;
    for (std::size_t i = 0; i < s; ++i)
      (*embedding_grad)[v * s + i] += one_hot[v] * grad_geo_seq[i];
  }
}

LcDiscriminator::LcDiscriminator(const LcGanConfig& cfg)
    : cfg_(cfg), net_(discriminator_specs(cfg), Rng(cfg.seed).fork(0xD15C).seed()) {}

double LcDiscriminator::forward(const std::vector<double>& distribution,
                                const std::vector<double>& c_lc, bool training,
                                LcDiscCache* cache) {
  const int s = cfg_.blocks;
  if (distribution.size() != static_cast<std::size_t>(s) ||
      c_lc.size() != static_cast<std::size_t>(4 * s))
    throw InvalidParameterError("discriminator input lengths do not match config");
  nn::NumArray input({5, s});
  for (int i = 0; i < s; ++i) input[i] = distribution[i];
  for (int r = 0; r < 4; ++r)
    for (int i = 0; i < s; ++i)
      input[(r + 1) * static_cast<std::size_t>(s) + i] = c_lc[r * s + i];
  nn::NumArray out =
      net_.forward(input, training, cache ? &cache->net : nullptr);
  if (cache) cache->input = input;
  return out[0];
}

void LcDiscriminator::backward(const LcDiscCache& cache, double grad_score,
                               nn::NetworkGrads* net_grads,
                               std::vector<double>* grad_distribution,
                               std::vector<double>* grad_conditions) const {
  const int s = cfg_.blocks;
  nn::NumArray g({1}, {grad_score});
  nn::NumArray din = net_.backward(cache.net, g, net_grads);
  if (grad_distribution != nullptr)
    grad_distribution->assign(din.data(), din.data() + s);
  if (grad_conditions != nullptr)
    grad_conditions->assign(din.data() + s, din.data() + 5 * s);
}

double lc_reconstruction_mse(const std::vector<std::vector<double>>& rm,
                             const std::vector<std::vector<double>>& gm) {
  if (rm.size() != gm.size() || rm.empty())
    throw InvalidParameterError("reconstruction MSE with mismatched batches");
  double acc = 0.0;
  for (std::size_t i = 0; i < rm.size(); ++i) {
    if (rm[i].size() != gm[i].size())
      throw InvalidParameterError("reconstruction MSE with mismatched lengths");
    for (std::size_t k = 0; k < rm[i].size(); ++k) {
      const double d = rm[i][k] - gm[i][k];
      acc += d * d;
    }
  }
  return acc / static_cast<double>(rm.size());
}

double loss_lcd(const std::vector<double>& score_fake,
                const std::vector<double>& score_mismatch,
                const std::vector<double>& score_real,
                const std::vector<std::vector<double>>& rm,
                const std::vector<std::vector<double>>& gm, double omega_lc) {
  const double adv = nn::adversarial_d_loss(score_fake, score_mismatch, score_real);
  return adv - omega_lc * lc_reconstruction_mse(rm, gm);
}

double loss_lcg(const std::vector<double>& score_fake) {
  return nn::adversarial_g_loss(score_fake);
}

int select_lcp(const std::vector<double>& distribution) {
  if (distribution.empty())
    throw InvalidParameterError("empty distribution in block selection");
  std::size_t best = 0;
  for (std::size_t i = 1; i < distribution.size(); ++i) {
    if (distribution[i] > distribution[best]) best = i;
  }
  return static_cast<int>(best) + 1;
}

SplicedTrajectory assemble_initial_lc_trajectory(const Trajectory& origin_hyp,
                                                 const Trajectory& target_hyp,
                                                 int lc_block, const BlockGrid& grid,
                                                 const std::string& vehicle_id) {
  if (origin_hyp.empty() || target_hyp.empty())
    throw InvalidParameterError("splice needs non-empty hypotheticals");
  const double splice_x = grid.block_start(lc_block);
  const auto t_origin = origin_hyp.crossing_time(splice_x);
  if (!t_origin.has_value())
    throw SpliceInfeasibleError("origin hypothetical never reaches block " +
                                std::to_string(lc_block));
  const auto t_target = target_hyp.crossing_time(splice_x);
  if (!t_target.has_value())
    throw SpliceInfeasibleError("target hypothetical never reaches block " +
                                std::to_string(lc_block));
  const double shift = *t_origin - *t_target;

  const LaneId origin_lane = origin_hyp.front().lane;
  const LaneId target_lane = target_hyp.front().lane;

  std::vector<TrajectorySample> samples;
  for (const auto& s : origin_hyp.samples()) {
    if (s.t < *t_origin - 1e-12) samples.push_back(s);
  }
  // Stitch sample: position continuity at the splice point; speed comes
  // from the target path, the lane label flips here.
  const auto target_at = target_hyp.at_time(*t_target);
  samples.push_back({*t_origin, splice_x, target_at ? target_at->v : 0.0,
                     target_lane});
  for (const auto& s : target_hyp.samples()) {
    if (s.t > *t_target + 1e-12) {
      samples.push_back({s.t + shift, std::max(s.x, splice_x), s.v, target_lane});
    }
  }

  SplicedTrajectory out{
      Trajectory(vehicle_id, TrajectoryKind::kHvReconstructed, std::move(samples)),
      LcEvent{vehicle_id, origin_lane, target_lane, lc_block, *t_origin,
              LcType::kDiscretionary}};
  return out;
}

}  // namespace artrec
