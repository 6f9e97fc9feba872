#include "artrec/traj_gan.hpp"

#include <algorithm>
#include <cmath>

namespace artrec {

namespace {

constexpr double kExitEps = 1e-12;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<nn::LayerSpec> traj_generator_specs(const TrajGanConfig& cfg) {
  std::vector<nn::LayerSpec> specs;
  nn::LayerSpec rnn;
  rnn.kind = nn::LayerKind::kBiRnn;
  rnn.input_size = 2;  // noise + condition
  rnn.hidden_size = cfg.hidden;
  specs.push_back(rnn);
  nn::LayerSpec conv;
  conv.kind = nn::LayerKind::kConv1d;
  conv.in_channels = 2 * cfg.hidden;
  conv.out_channels = 1;
  conv.kernel = 3;
  specs.push_back(conv);
  nn::LayerSpec bn;
  bn.kind = nn::LayerKind::kBatchNorm;
  bn.features = 1;
  specs.push_back(bn);
  nn::LayerSpec act;
  act.kind = nn::LayerKind::kLeakyRelu;
  act.slope = cfg.leak;
  specs.push_back(act);
  return specs;
}

std::vector<nn::LayerSpec> traj_discriminator_specs(const TrajGanConfig& cfg) {
  std::vector<nn::LayerSpec> specs;
  nn::LayerSpec rnn;
  rnn.kind = nn::LayerKind::kBiRnn;
  rnn.input_size = 2;  // sequence + condition
  rnn.hidden_size = cfg.hidden;
  specs.push_back(rnn);
  nn::LayerSpec conv;
  conv.kind = nn::LayerKind::kConv1d;
  conv.in_channels = 2 * cfg.hidden;
  conv.out_channels = cfg.conv_channels;
  conv.kernel = 3;
  specs.push_back(conv);
  nn::LayerSpec bn;
  bn.kind = nn::LayerKind::kBatchNorm;
  bn.features = cfg.conv_channels;
  specs.push_back(bn);
  nn::LayerSpec act;
  act.kind = nn::LayerKind::kLeakyRelu;
  act.slope = cfg.leak;
  specs.push_back(act);
  nn::LayerSpec pool;
  pool.kind = nn::LayerKind::kMeanPool;
  specs.push_back(pool);
  nn::LayerSpec dense;
  dense.kind = nn::LayerKind::kDense;
  dense.in_features = cfg.conv_channels;
  dense.out_features = 1;
  specs.push_back(dense);
  nn::LayerSpec squash;
  squash.kind = nn::LayerKind::kSigmoid;
  specs.push_back(squash);
  return specs;
}

}  // namespace

int TrajSequence::compute_exit(const std::vector<double>& values) {
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k] >= 1.0 - kExitEps) return static_cast<int>(k);
  }
  return static_cast<int>(values.size());
}

TrajSequence resample_to_sequence(const Trajectory& traj, double window_start,
                                  double dt, int steps, double segment_length) {
  if (traj.empty())
    throw InvalidParameterError("cannot resample an empty trajectory");
  TrajSequence seq;
  seq.window_start = window_start;
  seq.dt = dt;
  seq.segment_length = segment_length;
  seq.values.resize(steps);
  for (int k = 0; k < steps; ++k) {
    const double t = window_start + k * dt;
    double x;
    if (t <= traj.front().t)
      x = traj.front().x;
    else if (t >= traj.back().t)
      x = traj.back().x;
    else
      x = traj.at_time(t)->x;
    seq.values[k] = std::clamp(x / segment_length, 0.0, 1.0);
  }
  seq.exit_step = TrajSequence::compute_exit(seq.values);
  return seq;
}

TrajSequence build_traj_condition(const Trajectory& initial, double window_start,
                                  double dt, int steps, double segment_length) {
  return resample_to_sequence(initial, window_start, dt, steps, segment_length);
}

Trajectory sequence_to_trajectory(const TrajSequence& seq, const std::string& id,
                                  TrajectoryKind kind, LaneId lane) {
  std::vector<TrajectorySample> samples;
  const int last = std::min(seq.exit_step, seq.steps() - 1);
  for (int k = 0; k <= last; ++k) {
    const double x = std::clamp(seq.values[k], 0.0, 1.0) * seq.segment_length;
    double v;
    if (k < last) {
      v = std::max(0.0, (seq.values[k + 1] - seq.values[k]) * seq.segment_length / seq.dt);
    } else if (k > 0) {
      v = std::max(0.0, (seq.values[k] - seq.values[k - 1]) * seq.segment_length / seq.dt);
    } else {
      v = 0.0;
    }
    samples.push_back({seq.time_of(k), x, v, lane});
  }
  return Trajectory(id, kind, std::move(samples));
}

TrajGenerator::TrajGenerator(const TrajGanConfig& cfg)
    : cfg_(cfg), net_(traj_generator_specs(cfg), cfg.seed) {}

TrajSequence TrajGenerator::forward(const std::vector<double>& z,
                                    const TrajSequence& condition, bool training,
                                    TrajGenCache* cache) {
  const int t_steps = cfg_.steps;
  if (z.size() != static_cast<std::size_t>(t_steps) ||
      condition.steps() != t_steps)
    throw InvalidParameterError("trajectory generator input length mismatch");
  nn::NumArray input({2, t_steps});
  for (int k = 0; k < t_steps; ++k) {
    input[k] = z[k];
    input[static_cast<std::size_t>(t_steps) + k] = condition.values[k];
  }
  nn::NumArray raw =
      net_.forward(input, training, cache ? &cache->net : nullptr);

  // Per-step increment: the condition's own increment plus a bounded
  // squashed correction (raw = 0 reproduces the physics path exactly).
  const double corr = cfg_.correction_scale * cfg_.max_step_fraction;
  TrajSequence out;
  out.window_start = condition.window_start;
  out.dt = cfg_.dt;
  out.segment_length = cfg_.segment_length;
  out.values.resize(t_steps);
  std::vector<double> cum(t_steps);
  std::vector<double> inc(t_steps, 0.0);
  double acc = 0.0;
  for (int k = 0; k < t_steps; ++k) {
    cum[k] = acc;  // exclusive prefix: entry position is exactly zero
    out.values[k] = std::min(acc, 1.0);
    const double cond_inc =
        k + 1 < t_steps ? condition.values[k + 1] - condition.values[k] : 0.0;
    inc[k] = cond_inc + corr * (sigmoid(raw[k]) - 0.5);
    acc += std::clamp(inc[k], 0.0, cfg_.max_step_fraction);
  }
  out.exit_step = TrajSequence::compute_exit(out.values);
  if (cache) {
    cache->input = input;
    cache->raw = raw.values();
    cache->cum = cum;
    cache->inc = inc;
  }
  return out;
}

void TrajGenerator::backward(const TrajGenCache& cache,
                             const std::vector<double>& grad_values,
                             nn::NetworkGrads* net_grads,
                             std::vector<double>* grad_condition) const {
  const int t_steps = cfg_.steps;
  const double corr = cfg_.correction_scale * cfg_.max_step_fraction;
  // Through the stop-line clamp, then the exclusive prefix sum, then the
  // increment clamp, then the squashed correction and the condition's
  // finite difference.
  std::vector<double> dcum(t_steps, 0.0);
  for (int k = 0; k < t_steps; ++k) {
    dcum[k] = cache.cum[k] < 1.0 ? grad_values[k] : 0.0;
  }
  std::vector<double> dinc(t_steps, 0.0);
  double suffix = 0.0;
  for (int k = t_steps - 1; k >= 0; --k) {
    // Increment k feeds every output strictly after k; the increment
    // clamp gates the gradient.
    const bool open = cache.inc[k] > 0.0 && cache.inc[k] < cfg_.max_step_fraction;
    dinc[k] = open ? suffix : 0.0;
    suffix += dcum[k];
  }
  std::vector<double> d_cond_head(t_steps, 0.0);
  nn::NumArray g({1, t_steps});
  for (int k = 0; k < t_steps; ++k) {
    const double s = sigmoid(cache.raw[k]);
    g[k] = dinc[k] * corr * s * (1.0 - s);
    if (k + 1 < t_steps) {
      d_cond_head[k + 1] += dinc[k];
      d_cond_head[k] -= dinc[k];
    }
  }
  nn::NumArray din = net_.backward(cache.net, g, net_grads);
  if (grad_condition != nullptr) {
    grad_condition->assign(din.data() + t_steps, din.data() + 2 * t_steps);
    for (int k = 0; k < t_steps; ++k) (*grad_condition)[k] += d_cond_head[k];
  }
}

TrajDiscriminator::TrajDiscriminator(const TrajGanConfig& cfg)
    : cfg_(cfg), net_(traj_discriminator_specs(cfg), Rng(cfg.seed).fork(0xD15C).seed()) {}

double TrajDiscriminator::forward(const TrajSequence& m,
                                  const TrajSequence& condition, bool training,
                                  TrajDiscCache* cache) {
  const int t_steps = cfg_.steps;
  if (m.steps() != t_steps || condition.steps() != t_steps)
    throw InvalidParameterError("trajectory discriminator input length mismatch");
  nn::NumArray input({2, t_steps});
  for (int k = 0; k < t_steps; ++k) {
    input[k] = m.values[k];
    input[static_cast<std::size_t>(t_steps) + k] = condition.values[k];
  }
  nn::NumArray out =
      net_.forward(input, training, cache ? &cache->net : nullptr);
  return out[0];
}

void TrajDiscriminator::backward(const TrajDiscCache& cache, double grad_score,
                                 nn::NetworkGrads* net_grads,
                                 std::vector<double>* grad_m,
                                 std::vector<double>* grad_condition) const {
  const int t_steps = cfg_.steps;
  nn::NumArray g({1}, {grad_score});
  nn::NumArray din = net_.backward(cache.net, g, net_grads);
  if (grad_m != nullptr) grad_m->assign(din.data(), din.data() + t_steps);
  if (grad_condition != nullptr)
    grad_condition->assign(din.data() + t_steps, din.data() + 2 * t_steps);
}

double traj_reconstruction_mse(const std::vector<TrajSequence>& rm,
                               const std::vector<TrajSequence>& gm) {
  if (rm.size() != gm.size() || rm.empty())
    throw InvalidParameterError("reconstruction MSE with mismatched batches");
  double acc = 0.0;
  for (std::size_t i = 0; i < rm.size(); ++i) {
    if (rm[i].steps() != gm[i].steps())
      throw InvalidParameterError("reconstruction MSE with mismatched lengths");
    const int limit = std::min(rm[i].steps() - 1,
                               std::max(rm[i].exit_step, gm[i].exit_step));
    for (int k = 0; k <= limit; ++k) {
      const double d = rm[i].values[k] - gm[i].values[k];
      acc += d * d;
    }
  }
  return acc / static_cast<double>(rm.size());
}

double loss_trajd(const std::vector<double>& score_fake,
                  const std::vector<double>& score_mismatch,
                  const std::vector<double>& score_real,
                  const std::vector<TrajSequence>& rm,
                  const std::vector<TrajSequence>& gm, double omega_traj) {
  const double adv = nn::adversarial_d_loss(score_fake, score_mismatch, score_real);
  return adv - omega_traj * traj_reconstruction_mse(rm, gm);
}

double loss_trajg(const std::vector<double>& score_fake) {
  return nn::adversarial_g_loss(score_fake);
}

TrajSequence project_leader_feasible(const TrajSequence& refined,
                                     const Trajectory& leader,
                                     double queue_spacing) {
  TrajSequence out = refined;
  for (int k = 0; k < out.steps(); ++k) {
    const double t = out.time_of(k);
    const auto s = leader.at_time(t);
    if (!s.has_value()) continue;
    const double cap = (s->x - queue_spacing) / out.segment_length;
    out.values[k] = std::min(out.values[k], std::max(cap, 0.0));
  }
  for (int k = out.steps() - 2; k >= 0; --k) {
    out.values[k] = std::min(out.values[k], out.values[k + 1]);
  }
  out.exit_step = TrajSequence::compute_exit(out.values);
  return out;
}

TrajSequence SpliceMixture::mix(const std::vector<double>& distribution) const {
  if (candidates.empty() || distribution.size() != candidates.size())
    throw InvalidParameterError("splice mixture size mismatch");
  TrajSequence out = candidates.front();
  std::fill(out.values.begin(), out.values.end(), 0.0);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double p = distribution[c];
    for (int k = 0; k < out.steps(); ++k)
      out.values[k] += p * candidates[c].values[k];
  }
  out.exit_step = TrajSequence::compute_exit(out.values);
  return out;
}

std::vector<double> SpliceMixture::grad_distribution(
    const std::vector<double>& grad_values) const {
  std::vector<double> out(candidates.size(), 0.0);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < grad_values.size(); ++k)
      acc += grad_values[k] * candidates[c].values[k];
    out[c] = acc;
  }
  return out;
}

}  // namespace artrec
