#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "artrec/conditions.hpp"
#include "artrec/deduction.hpp"
#include "artrec/lc_gan.hpp"
#include "artrec/nn/optimizer.hpp"
#include "artrec/physics.hpp"
#include "artrec/scenario.hpp"
#include "artrec/synth.hpp"
#include "artrec/traj_gan.hpp"

namespace artrec {

/// Reconstruction-side parameters shared across the pipeline stages.
struct PipelineParams {
  IdmParams idm;
  SafetyParams safety;
  DeductionConfig deduction;
  double grid_resolution_m = 6.0;
  std::vector<int> lc_channels = {16, 32, 16};
  int lc_kernel = 3;
  int traj_hidden = 32;
  int traj_conv_channels = 16;
  double max_step_headroom = 1.3;   // increment bound over desired speed
  double window_factor = 1.25;      // sequence length in cycles
  int eval_draws = 8;               // noise draws averaged at inference
};

enum class TrainMode { kJoint, kSequential };

struct TrainConfig {
  int epochs = 500;
  int batch_size = 0;  // 0: full batch up to 64, else 32
  double lr_g = 2e-3;
  double lr_d = 2e-3;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double omega_lc = 1.0;
  double omega_traj = 1.0;
  double clip_norm = 1.0;
  std::uint64_t seed = 42;
  TrainMode mode = TrainMode::kJoint;
  int patience = 30;  // early stop on validation block error
  double validation_fraction = 0.2;

  void validate() const;
};

struct EpochStats {
  double loss_lc_d = 0.0;
  double loss_lc_g = 0.0;
  double loss_traj_d = 0.0;
  double loss_traj_g = 0.0;
  double val_be = 0.0;
  double val_pe = 0.0;
  double max_grad_norm_d = 0.0;  // post-clip global norms
  double max_grad_norm_g = 0.0;
};

struct TrainReport {
  TrainMode mode = TrainMode::kJoint;
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double best_val_be = 0.0;
  double best_val_pe = 0.0;
  double wall_time_s = 0.0;  // informational; never serialized

  int completed_epochs() const { return static_cast<int>(epochs.size()); }
};

/// Stable text form of a training report (wall time excluded so outputs
/// stay byte-identical across runs).
std::string serialize_train_report(const TrainReport& report);

/// One lane-changing training vehicle: raw conditions, the ground-truth
/// block encoding, the spliced-candidate set, and the real trajectory.
struct LcTrainSample {
  std::string vehicle_id;
  LcInput cond;
  std::vector<double> rm_lc;  // one-hot over S
  int true_block = 0;
  SpliceMixture splices;     // S candidate conditions
  TrajSequence rm_traj;
  LaneId origin_lane = 0;
  LaneId target_lane = 0;
  LcType lc_type = LcType::kDiscretionary;
  Trajectory origin_hyp;     // kept for baselines and physics comparisons
  Trajectory target_hyp;
};

struct NonLcTrainSample {
  std::string vehicle_id;
  TrajSequence c_traj;
  TrajSequence rm_traj;
};

struct TrainDataset {
  BlockGrid grid;
  LanePairVocab vocab;
  int seq_steps = 0;
  double dt = 1.0;
  double segment_length = 0.0;
  std::vector<LcTrainSample> lc_train, lc_val;
  std::vector<NonLcTrainSample> nolc_train, nolc_val;
  // Context for baseline evaluation of validation vehicles.
  std::vector<LaneGeometry> lanes;
};

/// Builds training samples from a labeled observation: per-vehicle
/// hypotheticals chained along ground-truth leaders, physics conditions,
/// block labels, splice candidates, and resampled real trajectories.
/// The split holds back the last cycles as validation.
TrainDataset build_dataset(const Observation& obs, const PipelineParams& params,
                           double validation_fraction);

struct GanModels {
  LcGanConfig lc_cfg;
  TrajGanConfig traj_cfg;
  LcGenerator lc_g;
  LcDiscriminator lc_d;
  TrajGenerator traj_g;
  TrajDiscriminator traj_d;
};

GanModels make_models(const TrainDataset& dataset, const PipelineParams& params,
                      std::uint64_t seed);

/// Checkpoint directory layout: lc_g.ckpt, lc_d.ckpt, traj_g.ckpt,
/// traj_d.ckpt + train_report.txt.
void save_models(const GanModels& models, const std::string& dir);
void load_models(GanModels& models, const std::string& dir);

/// Averaged generator distribution over several noise draws (inference).
std::vector<double> lc_distribution_eval(LcGenerator& gen, const LcInput& cond,
                                         Rng& rng, int draws);

/// Averaged refined sequence over several noise draws (inference).
TrajSequence refine_eval(TrajGenerator& gen, const TrajSequence& condition,
                         Rng& rng, int draws);

/// One joint epoch of Algorithm-style alternation: a discriminator step
/// over both networks with generators frozen, then a generator step that
/// backpropagates the trajectory reconstruction error through the
/// probability-weighted splice into the lane-change generator.
EpochStats train_epoch_joint(GanModels& models, TrainDataset& dataset,
                             const TrainConfig& cfg, nn::AdamState& adam_d,
                             nn::AdamState& adam_g, int epoch);

/// Full training with early stopping on validation block error; restores
/// the best-validation snapshot before returning.
TrainReport train(GanModels& models, TrainDataset& dataset, const TrainConfig& cfg);

/// Two-stage baseline: the lane-change networks converge first, then the
/// trajectory networks train against the frozen block choices.
TrainReport train_sequential(GanModels& models, TrainDataset& dataset,
                             const TrainConfig& cfg);

struct SceneResult {
  std::vector<Trajectory> trajectories;  // one per assignment, arrival order
  std::vector<LcEvent> lc_events;
  std::vector<VehicleAssignment> assignments;  // parallel to trajectories
};

/// Fig-1-style sequential reconstruction: probes pass through unchanged;
/// every other vehicle is propagated behind the most recent reconstructed
/// leader of its lane, routed through the lane-change path when the
/// deduction marked it as a lane changer, and refined by the trajectory
/// generator under the leader-gap projection.
SceneResult reconstruct_scene(const ScenarioBundle& observed,
                              const DeductionResult& deduction, GanModels& models,
                              const PipelineParams& params, std::uint64_t seed);

}  // namespace artrec
