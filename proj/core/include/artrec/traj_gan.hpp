#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "artrec/nn/losses.hpp"
#include "artrec/nn/network.hpp"
#include "artrec/scenario.hpp"

namespace artrec {

/// Fixed-length position sequence over one signal cycle at dt spacing,
/// normalized by segment length. Values are clamped: 0 before entry
/// (entry is step 0 by convention) and 1 after the stop line is crossed.
struct TrajSequence {
  double window_start = 0.0;
  double dt = 1.0;
  double segment_length = 0.0;
  std::vector<double> values;
  int exit_step = 0;  // first step at/above 1; values.size() if never

  int steps() const { return static_cast<int>(values.size()); }
  bool in_segment(int k) const { return k <= exit_step && k < steps(); }
  double time_of(int k) const { return window_start + k * dt; }

  static int compute_exit(const std::vector<double>& values);
};

/// Resamples a trajectory onto the sequence convention.
TrajSequence resample_to_sequence(const Trajectory& traj, double window_start,
                                  double dt, int steps, double segment_length);

/// Sequence for the generator condition input: the physics-based initial
/// trajectory (hypothetical or spliced), resampled.
TrajSequence build_traj_condition(const Trajectory& initial, double window_start,
                                  double dt, int steps, double segment_length);

/// Converts a sequence back to a trajectory; speeds by finite differences.
Trajectory sequence_to_trajectory(const TrajSequence& seq, const std::string& id,
                                  TrajectoryKind kind, LaneId lane);

struct TrajGanConfig {
  int steps = 0;
  double dt = 1.0;
  double segment_length = 0.0;
  double max_step_fraction = 0.12;  // per-step increment bound (normalized)
  double correction_scale = 0.5;    // squashed-correction share of the bound
  int hidden = 32;                  // recurrent width per direction
  int conv_channels = 16;           // discriminator feature width
  double leak = 0.01;
  std::uint64_t seed = 0;
};

struct TrajGenCache {
  nn::NetworkCache net;
  nn::NumArray input;        // {2, T}
  std::vector<double> raw;   // pre-squash head output
  std::vector<double> cum;   // pre-clamp cumulative positions
  std::vector<double> inc;   // pre-clamp per-step increments
};

/// Bidirectional-recurrent generator refining an initial trajectory. The
/// head emits bounded non-negative per-step increments -- the condition's
/// own increment plus a squashed correction -- that are cumulatively
/// summed, so refined positions start at the physics-based path, stay
/// monotone by construction and clamp at the stop line.
class TrajGenerator {
 public:
  TrajGenerator() = default;
  explicit TrajGenerator(const TrajGanConfig& cfg);

  const TrajGanConfig& config() const { return cfg_; }
  nn::Network& network() { return net_; }
  const nn::Network& network() const { return net_; }

  TrajSequence forward(const std::vector<double>& z, const TrajSequence& condition,
                       bool training, TrajGenCache* cache);

  /// Backward from dL/d(values); fills network gradients and optionally
  /// dL/d(condition values) for joint-training gradient routing.
  void backward(const TrajGenCache& cache, const std::vector<double>& grad_values,
                nn::NetworkGrads* net_grads,
                std::vector<double>* grad_condition) const;

 private:
  TrajGanConfig cfg_;
  nn::Network net_;
};

struct TrajDiscCache {
  nn::NetworkCache net;
};

/// Discriminator over (trajectory sequence, condition sequence) pairs.
class TrajDiscriminator {
 public:
  TrajDiscriminator() = default;
  explicit TrajDiscriminator(const TrajGanConfig& cfg);

  nn::Network& network() { return net_; }
  const nn::Network& network() const { return net_; }

  double forward(const TrajSequence& m, const TrajSequence& condition,
                 bool training, TrajDiscCache* cache);

  void backward(const TrajDiscCache& cache, double grad_score,
                nn::NetworkGrads* net_grads, std::vector<double>* grad_m,
                std::vector<double>* grad_condition) const;

 private:
  TrajGanConfig cfg_;
  nn::Network net_;
};

/// Masked reconstruction error: per sample the squared differences are
/// summed over in-segment steps only, then averaged over the batch.
double traj_reconstruction_mse(const std::vector<TrajSequence>& rm,
                               const std::vector<TrajSequence>& gm);

double loss_trajd(const std::vector<double>& score_fake,
                  const std::vector<double>& score_mismatch,
                  const std::vector<double>& score_real,
                  const std::vector<TrajSequence>& rm,
                  const std::vector<TrajSequence>& gm, double omega_traj);

double loss_trajg(const std::vector<double>& score_fake);

/// Inference-time feasibility projection: positions are capped at
/// (leader position - queue_spacing) wherever the reconstructed leader is
/// defined, then re-monotonized from the tail.
TrajSequence project_leader_feasible(const TrajSequence& refined,
                                     const Trajectory& leader,
                                     double queue_spacing);

/// The probability-weighted mixture of candidate spliced conditions used
/// to keep the block choice differentiable during joint training.
struct SpliceMixture {
  std::vector<TrajSequence> candidates;  // one per block

  TrajSequence mix(const std::vector<double>& distribution) const;
  /// dL/d(distribution)[k] = <grad_values, candidate_k>
  std::vector<double> grad_distribution(const std::vector<double>& grad_values) const;
};

}  // namespace artrec
