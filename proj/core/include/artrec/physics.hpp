#pragma once

#include <optional>
#include <vector>

#include "artrec/scenario.hpp"

namespace artrec {

/// Car-following parameters. Units: m, s, m/s, m/s^2.
struct IdmParams {
  double max_accel = 1.0;         // a
  double comfort_decel = 1.5;     // b
  double min_gap = 2.0;           // s0
  double time_headway = 1.5;      // T
  double accel_exponent = 4.0;    // delta
  double desired_speed = 11.11;   // free-flow speed target
  double dt = 1.0;                // simulation step
  double queue_spacing = 6.0;     // stopped front-to-front spacing
  double vehicle_length = 4.5;    // bumper-to-bumper gap = dx - length
  double v_stop = 0.1;            // below this a vehicle counts as stopped
  double stop_line_buffer = 0.5;  // queue head parks this far short of the line
  double max_horizon_s = 600.0;   // hypothetical-generation cap

  void validate() const;
};

struct VehicleState {
  double t = 0.0;
  double x = 0.0;
  double v = 0.0;
};

/// Desired following gap s* at the given own/leader speeds.
double idm_desired_gap(double v, double v_lead, const IdmParams& p);

/// IDM acceleration from own speed, leader speed and bumper-to-bumper gap.
double idm_acceleration_from_gap(double v, double v_lead, double gap,
                                 const IdmParams& p);

/// IDM acceleration for a lag vehicle behind an optional leader. The gap is
/// leader.x - lag.x - vehicle_length; a non-positive gap is an error.
/// Without a leader the interaction term drops.
double idm_acceleration(const VehicleState& lag,
                        const std::optional<VehicleState>& leader,
                        const IdmParams& p);

/// One explicit-Euler step with non-negative speed: braking that would
/// cross zero speed is cut at the exact stopping sub-step.
VehicleState propagate_step(const VehicleState& state, double accel,
                            const IdmParams& p);

/// Queue-join rule behind a stopped leader: a vehicle reaching (or coming
/// to rest just short of) the join point parks exactly queue_spacing
/// behind the leader with zero speed. Returns the adjusted next state.
VehicleState apply_queue_join(const VehicleState& cur, VehicleState next,
                              const VehicleState& leader, const IdmParams& p);

/// How to read a leader trajectory past its final sample: strict demands
/// coverage (a moving leader that ends mid-segment is an error), while
/// kDeparts treats the end as the leader leaving the lane.
enum class LeaderEnd { kStrict, kDeparts };

/// Generates the full in-lane trajectory a vehicle would follow from the
/// segment entrance to the stop line: IDM car-following behind `leader`
/// (if any), a stop at the signal for the head of the queue, and the
/// queue-join rule that parks followers queue_spacing behind a stopped
/// leader. Terminates when x reaches the segment length or the horizon cap.
Trajectory generate_hypothetical_trajectory(double entry_time,
                                            const LaneGeometry& lane,
                                            const Trajectory* leader,
                                            const SignalPlan& signal,
                                            const IdmParams& p,
                                            const std::string& vehicle_id = "hyp",
                                            LeaderEnd leader_end = LeaderEnd::kStrict);

enum class QueueState { kPreQueue, kStationary, kDissipating };

/// Per-time-step, per-block queue evolution of one lane.
class QueueProfile {
 public:
  QueueProfile() = default;
  QueueProfile(double t0, double dt, int steps, int blocks);

  double t0() const { return t0_; }
  double dt() const { return dt_; }
  int steps() const { return steps_; }
  int blocks() const { return blocks_; }

  QueueState& state(int step, int block1);
  QueueState state(int step, int block1) const;

  /// Queue state of a block at an arbitrary time (nearest step, clamped).
  QueueState at(double t, int block1) const;

  /// Most upstream stopped-vehicle position at a step; nullopt if no
  /// vehicle is stopped.
  std::optional<double>& tail(int step);
  std::optional<double> tail(int step) const;
  std::optional<double> tail_at(double t) const;

 private:
  int index_of(double t) const;

  double t0_ = 0.0;
  double dt_ = 1.0;
  int steps_ = 0;
  int blocks_ = 0;
  std::vector<QueueState> states_;
  std::vector<std::optional<double>> tails_;
};

/// Builds the queue profile of one lane from its trajectories over
/// [t0, t0 + steps*dt). A block is stationary while some vehicle is
/// stopped inside it, dissipating once its stopped occupant has resumed,
/// and pre-queue before any vehicle has stopped in it.
QueueProfile queue_profile(const std::vector<const Trajectory*>& lane_trajectories,
                           const BlockGrid& grid, double t0, int steps,
                           const IdmParams& p);

}  // namespace artrec
