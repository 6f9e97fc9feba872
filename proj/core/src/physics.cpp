#include "artrec/physics.hpp"

#include <algorithm>
#include <cmath>

namespace artrec {

void IdmParams::validate() const {
  if (max_accel <= 0.0 || comfort_decel <= 0.0 || min_gap <= 0.0 ||
      time_headway <= 0.0 || dt <= 0.0 || queue_spacing <= 0.0 ||
      accel_exponent <= 0.0 || desired_speed <= 0.0 || vehicle_length < 0.0)
    throw InvalidParameterError("car-following parameters must be positive");
}

double idm_desired_gap(double v, double v_lead, const IdmParams& p) {
  return p.min_gap + v * p.time_headway +
         v * (v - v_lead) / (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
}

double idm_acceleration_from_gap(double v, double v_lead, double gap,
                                 const IdmParams& p) {
  if (gap <= 0.0)
    throw InfeasibleStateError("non-positive car-following gap");
  const double s_star = idm_desired_gap(v, v_lead, p);
  return p.max_accel * (1.0 - std::pow(v / p.desired_speed, p.accel_exponent) -
                        (s_star / gap) * (s_star / gap));
}

double idm_acceleration(const VehicleState& lag,
                        const std::optional<VehicleState>& leader,
                        const IdmParams& p) {
  if (!leader.has_value()) {
    return p.max_accel *
           (1.0 - std::pow(lag.v / p.desired_speed, p.accel_exponent));
  }
  const double gap = leader->x - lag.x - p.vehicle_length;
  return idm_acceleration_from_gap(lag.v, leader->v, gap, p);
}

VehicleState propagate_step(const VehicleState& state, double accel,
                            const IdmParams& p) {
  VehicleState next;
  next.t = state.t + p.dt;
  const double v_raw = state.v + accel * p.dt;
  if (v_raw >= 0.0) {
    next.v = v_raw;
    next.x = state.x + state.v * p.dt + 0.5 * accel * p.dt * p.dt;
  } else {
    // Exact stopping sub-step: travel only until v hits zero.
    next.v = 0.0;
    const double t_stop = accel < 0.0 ? -state.v / accel : 0.0;
    next.x = state.x + state.v * t_stop + 0.5 * accel * t_stop * t_stop;
  }
  if (next.x < state.x) next.x = state.x;
  return next;
}

VehicleState apply_queue_join(const VehicleState& cur, VehicleState next,
                              const VehicleState& leader, const IdmParams& p) {
  if (leader.v >= p.v_stop) return next;
  const double join_x =
      std::min(leader.x - p.queue_spacing, leader.x - p.vehicle_length);
  const bool reached = next.x >= join_x - 1e-12;
  // The car-following equilibrium can stall a hair short of the join
  // point; absorb that into the spacing convention.
  const bool stalled_short =
      next.v < p.v_stop && next.x >= join_x - p.queue_spacing;
  if (reached || stalled_short) {
    next.x = std::max(join_x, cur.x);
    next.v = 0.0;
  }
  return next;
}

namespace {

// Leader lookup during hypothetical generation. Beyond the sampled span a
// stopped leader stays put, a departed leader disappears, and anything
// else means the caller gave us too little horizon.
std::optional<VehicleState> leader_state_at(const Trajectory& leader, double t,
                                            double segment_length,
                                            const IdmParams& p,
                                            LeaderEnd leader_end) {
  if (leader.empty()) return std::nullopt;
  if (t < leader.front().t - 1e-9) return std::nullopt;  // not yet present
  if (t <= leader.back().t + 1e-9) {
    const auto s = leader.at_time(std::min(t, leader.back().t));
    return VehicleState{t, s->x, s->v};
  }
  const auto& last = leader.back();
  if (last.x >= segment_length - 1e-6) return std::nullopt;  // departed
  if (last.v < p.v_stop) return VehicleState{t, last.x, 0.0};
  if (leader_end == LeaderEnd::kDeparts) return std::nullopt;  // left the lane
  throw InsufficientHorizonError("leader trajectory '" + leader.vehicle_id() +
                                 "' ends at t=" + std::to_string(last.t) +
                                 " before simulation time " + std::to_string(t));
}

}  // namespace

Trajectory generate_hypothetical_trajectory(double entry_time,
                                            const LaneGeometry& lane,
                                            const Trajectory* leader,
                                            const SignalPlan& signal,
                                            const IdmParams& p,
                                            const std::string& vehicle_id,
                                            LeaderEnd leader_end) {
  p.validate();
  const double length = lane.segment_length_m;

  VehicleState cur;
  cur.t = entry_time;
  cur.x = 0.0;
  if (leader != nullptr) {
    const auto ls = leader_state_at(*leader, entry_time, length, p, leader_end);
    cur.v = ls.has_value() ? ls->v : p.desired_speed;
  } else {
    cur.v = p.desired_speed;
  }

  std::vector<TrajectorySample> samples;
  samples.push_back({cur.t, cur.x, cur.v, lane.id});

  const double horizon_end = entry_time + p.max_horizon_s;
  while (cur.x < length && cur.t < horizon_end) {
    std::optional<VehicleState> lead;
    if (leader != nullptr) lead = leader_state_at(*leader, cur.t, length, p, leader_end);

    // Red signal acts as a stationary virtual leader, so the head of the
    // queue parks just short of the stop line and crosses it only when
    // released (keeps stop-line crossing times unambiguous).
    if (!lead.has_value() && !signal.is_green(cur.t, lane.movement) &&
        cur.x < length) {
      lead = VehicleState{cur.t, length - p.stop_line_buffer + p.queue_spacing,
                          0.0};
    }

    double accel;
    if (!lead.has_value()) {
      accel = idm_acceleration(cur, std::nullopt, p);
    } else {
      const double gap = std::max(lead->x - cur.x - p.vehicle_length, 0.01);
      accel = idm_acceleration_from_gap(cur.v, lead->v, gap, p);
    }

    VehicleState next = propagate_step(cur, accel, p);
    if (lead.has_value()) next = apply_queue_join(cur, next, *lead, p);
    // Hard no-collision clamp against a moving leader.
    if (lead.has_value()) {
      std::optional<VehicleState> lead_next;
      if (leader != nullptr)
        lead_next = leader_state_at(*leader, next.t, length, p, leader_end);
      if (!lead_next.has_value() && lead->v < p.v_stop && lead->x <= length)
        lead_next = VehicleState{next.t, lead->x, 0.0};
      if (lead_next.has_value() &&
          next.x > lead_next->x - p.vehicle_length) {
        next.x = std::max(cur.x, lead_next->x - p.vehicle_length);
        next.v = std::min(next.v, std::max(lead_next->v, 0.0));
      }
    }

    cur = next;
    if (cur.x >= length) {
      // Cut the final step at the stop line crossing.
      const auto& prev = samples.back();
      if (cur.x > length) {
        const double w = (length - prev.x) / (cur.x - prev.x);
        cur.t = prev.t + w * (cur.t - prev.t);
        cur.v = prev.v + w * (cur.v - prev.v);
        cur.x = length;
      }
      samples.push_back({cur.t, cur.x, cur.v, lane.id});
      break;
    }
    samples.push_back({cur.t, cur.x, cur.v, lane.id});
  }

  return Trajectory(vehicle_id, TrajectoryKind::kHypothetical, std::move(samples));
}

QueueProfile::QueueProfile(double t0, double dt, int steps, int blocks)
    : t0_(t0), dt_(dt), steps_(steps), blocks_(blocks),
      states_(static_cast<std::size_t>(steps) * blocks, QueueState::kPreQueue),
      tails_(steps) {}

QueueState& QueueProfile::state(int step, int block1) {
  return states_[static_cast<std::size_t>(step) * blocks_ + (block1 - 1)];
}

QueueState QueueProfile::state(int step, int block1) const {
  return states_[static_cast<std::size_t>(step) * blocks_ + (block1 - 1)];
}

int QueueProfile::index_of(double t) const {
  const int idx = static_cast<int>(std::lround((t - t0_) / dt_));
  return std::clamp(idx, 0, steps_ - 1);
}

QueueState QueueProfile::at(double t, int block1) const {
  if (steps_ == 0) return QueueState::kPreQueue;
  return state(index_of(t), block1);
}

std::optional<double>& QueueProfile::tail(int step) { return tails_[step]; }
std::optional<double> QueueProfile::tail(int step) const { return tails_[step]; }

std::optional<double> QueueProfile::tail_at(double t) const {
  if (steps_ == 0) return std::nullopt;
  return tails_[index_of(t)];
}

QueueProfile queue_profile(const std::vector<const Trajectory*>& lane_trajectories,
                           const BlockGrid& grid, double t0, int steps,
                           const IdmParams& p) {
  QueueProfile profile(t0, p.dt, steps, grid.block_count());
  std::vector<bool> ever_stopped(grid.block_count(), false);
  for (int step = 0; step < steps; ++step) {
    const double t = t0 + step * p.dt;
    std::vector<bool> stopped_now(grid.block_count(), false);
    std::optional<double> tail;
    for (const Trajectory* traj : lane_trajectories) {
      if (traj == nullptr) continue;
      const auto s = traj->at_time(t);
      if (!s.has_value()) continue;
      if (s->v < p.v_stop && s->x <= grid.segment_length_m()) {
        stopped_now[grid.block_of(std::min(s->x, grid.segment_length_m())) - 1] = true;
        if (!tail.has_value() || s->x < *tail) tail = s->x;
      }
    }
    profile.tail(step) = tail;
    for (int b = 1; b <= grid.block_count(); ++b) {
      if (stopped_now[b - 1]) {
        ever_stopped[b - 1] = true;
        profile.state(step, b) = QueueState::kStationary;
      } else {
        profile.state(step, b) = ever_stopped[b - 1] ? QueueState::kDissipating
                                                     : QueueState::kPreQueue;
      }
    }
  }
  return profile;
}

}  // namespace artrec
