#pragma once

#include <optional>
#include <string>
#include <vector>

#include "artrec/error.hpp"

namespace artrec {

using LaneId = int;

enum class Movement { kLeftTurn, kThrough, kRightTurn };

std::string to_string(Movement m);
Movement movement_from_string(const std::string& s);

/// One approach lane of the study segment. Positions run from 0 at the
/// segment entrance to segment_length_m at the stop line.
struct LaneGeometry {
  LaneId id = 0;
  Movement movement = Movement::kThrough;
  double segment_length_m = 0.0;
  std::vector<LaneId> adjacent;  // laterally adjacent lanes, ordered

  bool is_adjacent(LaneId other) const;
};

struct SignalPhase {
  std::vector<Movement> movements;
  double green_start_s = 0.0;  // offset within the cycle
  double green_end_s = 0.0;    // half-open: green on [start, end)
};

/// Fixed-time signal plan. Green windows are half-open intervals within
/// the cycle, repeated with period cycle_length_s from cycle_origin_s.
class SignalPlan {
 public:
  SignalPlan() = default;
  SignalPlan(double cycle_length_s, std::vector<SignalPhase> phases,
             double cycle_origin_s = 0.0);

  double cycle_length_s() const { return cycle_length_s_; }
  double cycle_origin_s() const { return cycle_origin_s_; }
  const std::vector<SignalPhase>& phases() const { return phases_; }

  /// True iff `movement` has green at absolute time t.
  bool is_green(double t, Movement movement) const;

  /// Offset of t within the cycle, in [0, cycle_length).
  double cycle_offset(double t) const;

  /// Absolute start time of the cycle containing t.
  double cycle_start(double t) const;

  bool serves(Movement movement) const;

 private:
  double cycle_length_s_ = 0.0;
  double cycle_origin_s_ = 0.0;
  std::vector<SignalPhase> phases_;
};

struct TrajectorySample {
  double t = 0.0;   // s
  double x = 0.0;   // m from segment origin
  double v = 0.0;   // m/s
  LaneId lane = 0;
};

enum class TrajectoryKind { kCvObserved, kHvReconstructed, kHypothetical, kGroundTruth };

/// Time-ordered motion history of one vehicle. Construction validates the
/// ordering invariants: strictly increasing time, non-decreasing position,
/// non-negative speed.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::string vehicle_id, TrajectoryKind kind,
             std::vector<TrajectorySample> samples);

  const std::string& vehicle_id() const { return vehicle_id_; }
  TrajectoryKind kind() const { return kind_; }
  const std::vector<TrajectorySample>& samples() const { return samples_; }
  bool empty() const { return samples_.empty(); }
  std::size_t size() const { return samples_.size(); }

  const TrajectorySample& front() const { return samples_.front(); }
  const TrajectorySample& back() const { return samples_.back(); }

  /// Linear interpolation at time t; nullopt outside the sampled span.
  std::optional<TrajectorySample> at_time(double t) const;

  /// First time the vehicle reaches position x (linear interpolation);
  /// nullopt if x is never reached.
  std::optional<double> crossing_time(double x) const;

  /// Sample indices at which the lane label changes.
  std::vector<std::size_t> lane_change_indices() const;

 private:
  std::string vehicle_id_;
  TrajectoryKind kind_ = TrajectoryKind::kHypothetical;
  std::vector<TrajectorySample> samples_;
};

enum class DetectorKind { kArrival, kDeparture };

struct DetectorEvent {
  LaneId lane = 0;
  double t = 0.0;
  DetectorKind kind = DetectorKind::kArrival;
  std::optional<std::string> vehicle_tag;  // ground truth only
};

/// Spatial discretization of the segment into S blocks of fixed
/// resolution; the last block may be shorter when the length does not
/// divide evenly. Blocks are 1-based.
class BlockGrid {
 public:
  BlockGrid() = default;
  BlockGrid(double segment_length_m, double resolution_m = 6.0);

  int block_count() const { return block_count_; }
  double resolution_m() const { return resolution_m_; }
  double segment_length_m() const { return segment_length_m_; }

  /// Block containing position x; [(i-1)*res, i*res) with x == L mapping
  /// to the last block.
  int block_of(double x) const;

  /// Inclusive lower edge of block i.
  double block_start(int block) const;
  /// Exclusive upper edge of block i (clamped to the segment length).
  double block_end(int block) const;

 private:
  double segment_length_m_ = 0.0;
  double resolution_m_ = 0.0;
  int block_count_ = 0;
};

/// One-hot block encoding of a lane-change position.
std::vector<double> encode_lcp(const BlockGrid& grid, int lc_block);
/// Index of the (single) active entry; argmax for soft inputs.
int decode_lcp(const std::vector<double>& encoding);

enum class LcType { kMandatory, kDiscretionary };

struct LcEvent {
  std::string vehicle_id;
  LaneId origin_lane = 0;
  LaneId target_lane = 0;
  int lc_block = 0;
  double lc_time = 0.0;
  LcType lc_type = LcType::kDiscretionary;
};

struct GroundTruth {
  std::vector<Trajectory> trajectories;
  std::vector<LcEvent> lc_events;
};

/// Everything known about one study segment: geometry, signal plan,
/// detector events, the observed probe trajectories, and (for synthetic
/// or labeled data) the full answer key.
struct ScenarioBundle {
  std::vector<LaneGeometry> lanes;
  SignalPlan signal;
  std::vector<DetectorEvent> detectors;
  std::vector<Trajectory> cv_trajectories;
  std::optional<GroundTruth> ground_truth;
  double detector_position_m = -1.0;  // downstream detector; <0 means stop line

  const LaneGeometry& lane(LaneId id) const;
  double segment_length_m() const;
  double downstream_detector_m() const;
  std::vector<DetectorEvent> events(LaneId lane, DetectorKind kind) const;

  /// Structural validation: positive lengths, symmetric adjacency, signal
  /// coverage of every lane movement, trajectories within bounds.
  void validate() const;
};

}  // namespace artrec
