#pragma once

#include <cstdint>
#include <vector>

#include "artrec/conditions.hpp"
#include "artrec/nn/losses.hpp"
#include "artrec/nn/network.hpp"
#include "artrec/scenario.hpp"

namespace artrec {

struct LcGanConfig {
  int blocks = 0;      // S
  int pair_vocab = 0;  // ordered origin-target pairs
  std::vector<int> conv_channels = {16, 32, 16};
  int kernel = 3;
  double leak = 0.01;
  std::uint64_t seed = 0;
};

/// Physics-derived conditioning of one candidate lane change: three
/// per-block sequences plus the lane-pair one-hot whose embedding the
/// generator owns.
struct LcInput {
  std::vector<double> safety;         // length S
  std::vector<double> signal_origin;  // length S
  std::vector<double> signal_target;  // length S
  std::vector<double> geo_onehot;     // length vocab
};

struct LcGenCache {
  nn::NetworkCache net;
  nn::NumArray input;  // assembled {5, S}
  std::vector<double> geo_onehot;
};

/// Generator: noise + conditions -> probability distribution over the S
/// blocks. The geometric-pair embedding is a trainable (vocab x S) map
/// updated by generator gradients.
class LcGenerator {
 public:
  LcGenerator() = default;
  explicit LcGenerator(const LcGanConfig& cfg);

  const LcGanConfig& config() const { return cfg_; }
  nn::Network& network() { return net_; }
  const nn::Network& network() const { return net_; }
  nn::NumArray& geo_embedding() { return geo_embedding_; }
  const nn::NumArray& geo_embedding() const { return geo_embedding_; }

  /// Embedded geometric sequence for a pair one-hot.
  std::vector<double> geo_sequence(const std::vector<double>& one_hot) const;

  /// Full condition sequence {safety || signal_o || signal_t || geo},
  /// length 4*S, with the embedding applied.
  std::vector<double> conditions(const LcInput& cond) const;

  /// Distribution over S blocks (sums to 1).
  std::vector<double> forward(const std::vector<double>& z, const LcInput& cond,
                              bool training, LcGenCache* cache);

  /// Backward from dL/d(distribution); accumulates network gradients and
  /// the embedding gradient (input-path contribution).
  void backward(const LcGenCache& cache, const std::vector<double>& grad_dist,
                nn::NetworkGrads* net_grads, nn::NumArray* embedding_grad) const;

  /// Adds the discriminator-input-path contribution dL/d(geo sequence)
  /// onto the embedding gradient.
  static void accumulate_embedding_grad(const std::vector<double>& one_hot,
                                        const std::vector<double>& grad_geo_seq,
                                        nn::NumArray* embedding_grad);

 private:
  LcGanConfig cfg_;
  nn::NumArray geo_embedding_;  // {vocab, S}
  nn::Network net_;
};

struct LcDiscCache {
  nn::NetworkCache net;
  nn::NumArray input;  // assembled {5, S}
};

/// Discriminator: (distribution || conditions) -> score in (0, 1).
class LcDiscriminator {
 public:
  LcDiscriminator() = default;
  explicit LcDiscriminator(const LcGanConfig& cfg);

  nn::Network& network() { return net_; }
  const nn::Network& network() const { return net_; }

  double forward(const std::vector<double>& distribution,
                 const std::vector<double>& c_lc, bool training,
                 LcDiscCache* cache);

  /// Backward from dL/dscore; returns dL/d(distribution) and
  /// dL/d(c_lc) for condition-path routing.
  void backward(const LcDiscCache& cache, double grad_score,
                nn::NetworkGrads* net_grads, std::vector<double>* grad_distribution,
                std::vector<double>* grad_conditions) const;

 private:
  LcGanConfig cfg_;
  nn::Network net_;
};

/// Eq-style discriminator loss: adversarial term plus the weighted
/// negative reconstruction MSE; the discriminator ascends this value.
double loss_lcd(const std::vector<double>& score_fake,
                const std::vector<double>& score_mismatch,
                const std::vector<double>& score_real,
                const std::vector<std::vector<double>>& rm,
                const std::vector<std::vector<double>>& gm, double omega_lc);

/// Generator adversarial loss, minimized by the generator.
double loss_lcg(const std::vector<double>& score_fake);

/// Mean over the batch of the summed squared block differences.
double lc_reconstruction_mse(const std::vector<std::vector<double>>& rm,
                             const std::vector<std::vector<double>>& gm);

/// 1-based argmax; ties resolve to the lowest index.
int select_lcp(const std::vector<double>& distribution);

struct SplicedTrajectory {
  Trajectory trajectory;
  LcEvent event;
};

/// Combines the origin-lane hypothetical up to the chosen block's entry
/// position with the target-lane hypothetical from there on, re-stitching
/// time so the splice position is crossed at the origin trajectory's time.
SplicedTrajectory assemble_initial_lc_trajectory(const Trajectory& origin_hyp,
                                                 const Trajectory& target_hyp,
                                                 int lc_block, const BlockGrid& grid,
                                                 const std::string& vehicle_id = "lcv");

}  // namespace artrec
