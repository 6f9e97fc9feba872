#pragma once

#include <vector>

#include "artrec/physics.hpp"
#include "artrec/scenario.hpp"

namespace artrec {

/// Gap-acceptance parameters of the safety feasibility curve.
struct SafetyParams {
  double accept_gap_m = 12.0;   // above this the maneuver is fully feasible
  double critical_gap_m = 3.0;  // below this it is rejected outright
  double beta0 = 0.0;           // logit intercept
  double beta1 = 0.8;           // logit slope, 1/m

  void validate() const;
};

/// The four per-block condition sequences of one candidate lane change,
/// each of length S, plus their fixed-order concatenation.
struct ConditionBundle {
  std::vector<double> safety;
  std::vector<double> signal_origin;
  std::vector<double> signal_target;
  std::vector<double> geo;

  /// {safety || signal_origin || signal_target || geo}, length 4*S.
  std::vector<double> concat() const;
};

/// Splits a concatenated sequence back into its four components.
ConditionBundle split_conditions(const std::vector<double>& c_lc);

/// Gap-acceptance feasibility for a single gap: 1 at or above the
/// acceptable gap, 0 at or below the critical gap, a midpoint-centered
/// logistic in between.
double safety_probability(double gap, const SafetyParams& sp);

/// Per-block gap-acceptance feasibility. For each block, the gap to the
/// nearest preceding target-lane vehicle is evaluated at the time the
/// hypothetical trajectory enters the block; an empty target lane is
/// fully feasible.
std::vector<double> safety_condition(const Trajectory& hypothetical,
                                     const std::vector<const Trajectory*>& target_lane,
                                     const BlockGrid& grid, const SafetyParams& sp,
                                     const IdmParams& p);

/// Per-block queue feasibility from a lane's queue profile, evaluated at
/// each block's inherited time: 1 before queue formation, 0 inside a
/// standing queue, 1 once the occupying vehicle has resumed.
std::vector<double> signal_condition(const QueueProfile& profile,
                                     const Trajectory& hypothetical,
                                     const BlockGrid& grid);

/// Ordered origin-target lane pair vocabulary over adjacent lanes.
class LanePairVocab {
 public:
  LanePairVocab() = default;
  explicit LanePairVocab(const std::vector<LaneGeometry>& lanes,
                         bool include_non_adjacent = false);

  int size() const { return static_cast<int>(pairs_.size()); }
  const std::vector<std::pair<LaneId, LaneId>>& pairs() const { return pairs_; }
  int index_of(LaneId origin, LaneId target) const;
  std::vector<double> one_hot(LaneId origin, LaneId target) const;

 private:
  std::vector<std::pair<LaneId, LaneId>> pairs_;
};

/// Applies a (vocab x S) linear embedding to a pair one-hot, producing the
/// length-S geometric condition sequence.
std::vector<double> embed_geo(const std::vector<double>& embedding, int vocab,
                              int blocks, const std::vector<double>& one_hot);

/// Time at which the hypothetical trajectory enters each block (the
/// block's inherited time).
std::vector<double> block_entry_times(const Trajectory& hypothetical,
                                      const BlockGrid& grid);

/// Mandatory vs discretionary classification from movement labels.
LcType classify_lc_type(LaneId origin, LaneId target,
                        const std::vector<LaneGeometry>& lanes);

}  // namespace artrec
