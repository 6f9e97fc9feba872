#include "artrec/synth.hpp"

#include "artrec/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

namespace artrec {

void SynthConfig::validate() const {
  if (lanes.empty()) throw InvalidParameterError("synth config has no lanes");
  if (arrival_rates.size() != lanes.size())
    throw InvalidParameterError("one arrival rate per lane required");
  for (double r : arrival_rates)
    if (r < 0.0) throw InvalidParameterError("negative arrival rate");
  if (cycles <= 0) throw InvalidParameterError("cycle count must be positive");
  if (idm_jitter < 0.0 || idm_jitter >= 0.5)
    throw InvalidParameterError("driver jitter must lie in [0, 0.5)");
  if (mlc_probability < 0.0 || mlc_probability > 1.0 || dlc_fraction < 0.0 ||
      dlc_fraction > 1.0)
    throw InvalidParameterError("probabilities must lie in [0, 1]");
  driver.validate();
  safety.validate();
}

SynthConfig two_lane_benchmark(std::uint64_t seed) {
  SynthConfig cfg;
  const double length = 120.0;
  cfg.lanes = {
      {1, Movement::kThrough, length, {2}},
      {2, Movement::kThrough, length, {1}},
  };
  cfg.signal = SignalPlan(
      60.0, {{{Movement::kThrough, Movement::kLeftTurn}, 45.0, 60.0}});
  cfg.cycles = 10;
  cfg.arrival_rates = {7.0, 2.0};  // asymmetric queues motivate changes
  cfg.dlc_rule = DlcRule::kQueueTail;
  cfg.dlc_fraction = 0.8;
  cfg.seed = seed;
  cfg.driver.max_accel = 1.2;
  cfg.driver.comfort_decel = 1.8;
  cfg.driver.time_headway = 1.3;
  cfg.driver.desired_speed = 12.0;
  cfg.driver.queue_spacing = 6.5;
  cfg.driver.dt = 0.5;
  return cfg;
}

SynthConfig three_lane_scenario(std::uint64_t seed) {
  SynthConfig cfg;
  const double length = 120.0;
  cfg.lanes = {
      {1, Movement::kLeftTurn, length, {2}},
      {2, Movement::kThrough, length, {1, 3}},
      {3, Movement::kThrough, length, {2}},
  };
  cfg.signal = SignalPlan(60.0, {
                                    {{Movement::kThrough}, 33.0, 60.0},
                                    {{Movement::kLeftTurn}, 5.0, 28.0},
                                });
  cfg.cycles = 6;
  cfg.arrival_rates = {1.5, 4.0, 3.0};
  cfg.mlc_probability = 0.4;
  cfg.dlc_rule = DlcRule::kMixed;
  cfg.dlc_fraction = 0.4;
  cfg.seed = seed;
  cfg.driver.max_accel = 1.2;
  cfg.driver.comfort_decel = 1.8;
  cfg.driver.time_headway = 1.3;
  cfg.driver.desired_speed = 12.0;
  cfg.driver.queue_spacing = 6.5;
  cfg.driver.dt = 0.5;
  return cfg;
}

namespace {

enum class Trigger { kQueueTail, kEarlyGap };

struct SimVehicle {
  std::string id;
  LaneId lane = 0;
  double x = 0.0;
  double v = 0.0;
  IdmParams params;
  bool wants_lc = false;
  LaneId lc_target = 0;
  LcType lc_type = LcType::kDiscretionary;
  Trigger trigger = Trigger::kQueueTail;
  bool changed = false;
  bool exited = false;
  std::vector<TrajectorySample> history;
};

struct PendingEntry {
  double scheduled_t = 0.0;
  LaneId lane = 0;
  bool mlc = false;
  LaneId mlc_target = 0;
  bool dlc = false;
  Trigger trigger = Trigger::kQueueTail;
  IdmParams params;
};

double jittered(double base, double jitter, Rng& rng) {
  return base * (1.0 + jitter * rng.uniform(-1.0, 1.0));
}

// Most upstream stopped position of one lane right now.
std::optional<double> live_queue_tail(const std::vector<SimVehicle*>& lane_order,
                                      double v_stop) {
  std::optional<double> tail;
  for (const SimVehicle* v : lane_order) {
    if (v->v < v_stop && (!tail.has_value() || v->x < *tail)) tail = v->x;
  }
  return tail;
}

}  // namespace

ScenarioBundle generate_scenario(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const double length = cfg.lanes.front().segment_length_m;
  const double cycle = cfg.signal.cycle_length_s();
  const double horizon = cfg.cycles * cycle;
  const double flush_limit = horizon + 2.0 * cycle;
  const double dt = cfg.driver.dt;
  const BlockGrid grid(length, cfg.grid_resolution_m);

  std::map<LaneId, std::size_t> lane_pos;
  for (std::size_t i = 0; i < cfg.lanes.size(); ++i) lane_pos[cfg.lanes[i].id] = i;

  // Schedule arrivals per lane per cycle with jittered headways.
  std::vector<std::deque<PendingEntry>> pending(cfg.lanes.size());
  for (std::size_t li = 0; li < cfg.lanes.size(); ++li) {
    const auto& lane = cfg.lanes[li];
    for (int c = 0; c < cfg.cycles; ++c) {
      const double rate = cfg.arrival_rates[li];
      int n = static_cast<int>(std::floor(rate));
      if (rng.uniform() < rate - n) ++n;
      if (n == 0) continue;
      const double mean_headway = cycle / n;
      std::vector<double> times;
      double t = c * cycle + 0.5 * mean_headway;
      for (int i = 0; i < n; ++i) {
        times.push_back(t + cfg.headway_jitter * mean_headway * rng.uniform(-1.0, 1.0));
        t += mean_headway;
      }
      std::sort(times.begin(), times.end());
      for (std::size_t i = 1; i < times.size(); ++i) {
        times[i] = std::max(times[i], times[i - 1] + cfg.min_entry_headway_s);
      }
      for (double entry_t : times) {
        PendingEntry e;
        e.scheduled_t = entry_t;
        e.lane = lane.id;
        e.params = cfg.driver;
        e.params.max_accel = jittered(cfg.driver.max_accel, cfg.idm_jitter, rng);
        e.params.comfort_decel = jittered(cfg.driver.comfort_decel, cfg.idm_jitter, rng);
        e.params.time_headway = jittered(cfg.driver.time_headway, cfg.idm_jitter, rng);
        e.params.desired_speed = jittered(cfg.driver.desired_speed, cfg.idm_jitter, rng);
        e.params.queue_spacing = jittered(cfg.driver.queue_spacing, cfg.idm_jitter, rng);

        // Mandatory changes: a turning vehicle that entered the adjacent
        // through lane and must reach its movement lane before the stop line.
        if (cfg.mlc_probability > 0.0 && lane.movement == Movement::kThrough) {
          for (LaneId adj : lane.adjacent) {
            const auto& adj_lane = cfg.lanes[lane_pos.at(adj)];
            if (adj_lane.movement != Movement::kThrough &&
                rng.uniform() < cfg.mlc_probability) {
              e.mlc = true;
              e.mlc_target = adj;
              break;
            }
          }
        }
        if (!e.mlc && rng.uniform() < cfg.dlc_fraction) {
          e.dlc = true;
          switch (cfg.dlc_rule) {
            case DlcRule::kQueueTail:
              e.trigger = Trigger::kQueueTail;
              break;
            case DlcRule::kEarlyGap:
              e.trigger = Trigger::kEarlyGap;
              break;
            case DlcRule::kMixed:
              e.trigger = rng.uniform() < cfg.mixed_queue_tail_weight
                              ? Trigger::kQueueTail
                              : Trigger::kEarlyGap;
              break;
          }
        }
        pending[li].push_back(e);
      }
    }
  }

  std::vector<std::unique_ptr<SimVehicle>> vehicles;
  std::vector<std::vector<SimVehicle*>> lanes(cfg.lanes.size());
  std::vector<LcEvent> lc_events;
  int next_id = 1;

  auto lane_leader = [&](std::size_t li, double x) -> SimVehicle* {
    SimVehicle* best = nullptr;
    for (SimVehicle* v : lanes[li]) {
      if (v->x > x && (best == nullptr || v->x < best->x)) best = v;
    }
    return best;
  };
  auto lane_follower = [&](std::size_t li, double x) -> SimVehicle* {
    SimVehicle* best = nullptr;
    for (SimVehicle* v : lanes[li]) {
      if (v->x < x && (best == nullptr || v->x > best->x)) best = v;
    }
    return best;
  };

  for (double t = 0.0; t <= flush_limit + 1e-9; t += dt) {
    // Release scheduled vehicles whose entrance is clear.
    for (std::size_t li = 0; li < cfg.lanes.size(); ++li) {
      auto& queue = pending[li];
      while (!queue.empty() && queue.front().scheduled_t <= t + 1e-9) {
        SimVehicle* entry_leader = lane_leader(li, -1e-9);
        if (entry_leader != nullptr) {
          const double clearance =
              entry_leader->x - queue.front().params.vehicle_length;
          if (clearance < queue.front().params.queue_spacing) break;
        }
        if (t - queue.front().scheduled_t > 1.5 * cycle) {
          throw GenerationError(
              "arrival rate saturates the segment entrance (lane " +
              std::to_string(cfg.lanes[li].id) + ")");
        }
        double entry_speed = queue.front().params.desired_speed;
        if (entry_leader != nullptr) {
          entry_speed = std::min(
              entry_speed, std::max(entry_leader->v, 0.0) +
                               0.5 * queue.front().params.max_accel);
        }
        auto veh = std::make_unique<SimVehicle>();
        veh->id = "v" + std::to_string(next_id++);
        veh->lane = cfg.lanes[li].id;
        veh->x = 0.0;
        veh->v = entry_speed;
        veh->params = queue.front().params;
        if (queue.front().mlc) {
          veh->wants_lc = true;
          veh->lc_target = queue.front().mlc_target;
          veh->lc_type = LcType::kMandatory;
          veh->trigger = Trigger::kEarlyGap;
        } else if (queue.front().dlc) {
          veh->wants_lc = true;
          veh->lc_target = 0;  // chosen at trigger time
          veh->lc_type = LcType::kDiscretionary;
          veh->trigger = queue.front().trigger;
        }
        veh->history.push_back({t, 0.0, veh->v, veh->lane});
        lanes[li].push_back(veh.get());
        vehicles.push_back(std::move(veh));
        queue.pop_front();
      }
    }

    // Lane-change decisions, deterministic order: lanes by index, then
    // vehicles front to back.
    for (std::size_t li = 0; li < cfg.lanes.size(); ++li) {
      std::vector<SimVehicle*> order = lanes[li];
      std::sort(order.begin(), order.end(),
                [](const SimVehicle* a, const SimVehicle* b) { return a->x > b->x; });
      for (SimVehicle* veh : order) {
        if (!veh->wants_lc || veh->changed || veh->exited) continue;
        if (veh->v < veh->params.v_stop) continue;  // queued: no more changes
        if (veh->x <= 1e-9 || veh->x >= length - 1e-9) continue;

        LaneId target = veh->lc_target;
        const auto& lane_geo = cfg.lanes[li];
        if (veh->lc_type == LcType::kDiscretionary) {
          bool triggered = false;
          const auto own_tail = live_queue_tail(lanes[li], veh->params.v_stop);
          for (LaneId adj : lane_geo.adjacent) {
            const std::size_t ti = lane_pos.at(adj);
            if (cfg.lanes[ti].movement != lane_geo.movement) continue;
            if (veh->trigger == Trigger::kQueueTail) {
              if (!own_tail.has_value()) continue;
              const double dist_to_tail = *own_tail - veh->x;
              if (dist_to_tail < 0.0 || dist_to_tail > 2.5 * cfg.grid_resolution_m)
                continue;
              const auto adj_tail = live_queue_tail(lanes[ti], veh->params.v_stop);
              if (adj_tail.has_value() &&
                  *adj_tail <= *own_tail + cfg.grid_resolution_m)
                continue;  // target queue not shorter
              target = adj;
              triggered = true;
              break;
            } else {
              if (veh->x > 3.0 * cfg.grid_resolution_m) continue;
              const SimVehicle* own_lead = lane_leader(li, veh->x);
              const SimVehicle* adj_lead = lane_leader(ti, veh->x);
              const double own_gap = own_lead
                                         ? own_lead->x - veh->x
                                         : std::numeric_limits<double>::infinity();
              const double adj_gap = adj_lead
                                         ? adj_lead->x - veh->x
                                         : std::numeric_limits<double>::infinity();
              if (adj_gap <= own_gap * 1.2) continue;
              target = adj;
              triggered = true;
              break;
            }
          }
          if (!triggered) continue;
        } else {
          if (veh->x > 0.85 * length) continue;  // too late, stays mis-laned
        }
        if (target == 0) continue;
        const std::size_t ti = lane_pos.at(target);

        const SimVehicle* lead = lane_leader(ti, veh->x);
        const SimVehicle* lag = lane_follower(ti, veh->x);
        const double lead_gap = lead
                                    ? lead->x - veh->x - veh->params.vehicle_length
                                    : std::numeric_limits<double>::infinity();
        const double lag_gap = lag ? veh->x - lag->x - veh->params.vehicle_length
                                   : std::numeric_limits<double>::infinity();
        if (lag_gap < std::max(veh->params.min_gap, 2.0)) continue;
        if (lead_gap <= 0.0) continue;
        if (rng.uniform() >= safety_probability(lead_gap, cfg.safety)) continue;

        auto& from = lanes[li];
        from.erase(std::remove(from.begin(), from.end(), veh), from.end());
        lanes[ti].push_back(veh);
        veh->lane = target;
        veh->changed = true;
        lc_events.push_back({veh->id, lane_geo.id, target,
                             grid.block_of(std::min(veh->x, length)), t,
                             veh->lc_type});
      }
    }

    // Car-following step; next states computed against current ones.
    struct Update {
      SimVehicle* veh;
      VehicleState next;
    };
    std::vector<Update> updates;
    for (std::size_t li = 0; li < cfg.lanes.size(); ++li) {
      std::vector<SimVehicle*> order = lanes[li];
      std::sort(order.begin(), order.end(),
                [](const SimVehicle* a, const SimVehicle* b) { return a->x > b->x; });
      for (SimVehicle* veh : order) {
        if (veh->exited) continue;
        const SimVehicle* lead = lane_leader(li, veh->x);
        std::optional<VehicleState> lead_state;
        if (lead != nullptr) {
          lead_state = VehicleState{t, lead->x, lead->v};
        } else if (!cfg.signal.is_green(t, cfg.lanes[li].movement) &&
                   veh->x < length) {
          lead_state = VehicleState{
              t, length - veh->params.stop_line_buffer + veh->params.queue_spacing,
              0.0};
        }
        double accel;
        if (!lead_state.has_value()) {
          accel = idm_acceleration(VehicleState{t, veh->x, veh->v}, std::nullopt,
                                   veh->params);
        } else {
          const double gap = std::max(
              lead_state->x - veh->x - veh->params.vehicle_length, 0.01);
          accel = idm_acceleration_from_gap(veh->v, lead_state->v, gap, veh->params);
        }
        VehicleState next = propagate_step({t, veh->x, veh->v}, accel, veh->params);
        if (lead_state.has_value())
          next = apply_queue_join({t, veh->x, veh->v}, next, *lead_state,
                                  veh->params);
        if (lead != nullptr) {
          const double bound = lead->x - veh->params.vehicle_length;
          if (next.x > bound) {
            next.x = std::max(veh->x, bound);
            next.v = std::min(next.v, std::max(lead->v, 0.0));
          }
        }
        updates.push_back({veh, next});
      }
    }
    for (auto& u : updates) {
      SimVehicle* veh = u.veh;
      if (u.next.x >= length - 1e-12) {
        const double prev_x = veh->x;
        const double w =
            u.next.x > prev_x ? (length - prev_x) / (u.next.x - prev_x) : 1.0;
        const double t_cross = t + w * dt;
        const double v_cross = veh->v + w * (u.next.v - veh->v);
        veh->history.push_back({t_cross, length, v_cross, veh->lane});
        veh->exited = true;
        auto& from = lanes[lane_pos.at(veh->lane)];
        from.erase(std::remove(from.begin(), from.end(), veh), from.end());
        continue;
      }
      veh->x = u.next.x;
      veh->v = u.next.v;
      veh->history.push_back({t + dt, veh->x, veh->v, veh->lane});
    }

    if (t >= horizon) {
      bool all_done = true;
      for (const auto& q : pending)
        if (!q.empty()) all_done = false;
      for (const auto& v : vehicles)
        if (!v->exited) all_done = false;
      if (all_done) break;
    }
  }

  for (const auto& q : pending) {
    if (!q.empty())
      throw GenerationError("scheduled arrivals never entered: segment saturated");
  }
  for (const auto& v : vehicles) {
    if (!v->exited)
      throw GenerationError("vehicle " + v->id + " never cleared the segment");
  }

  ScenarioBundle bundle;
  bundle.lanes = cfg.lanes;
  bundle.signal = cfg.signal;
  GroundTruth truth;
  const double detector_x = length;
  for (const auto& v : vehicles) {
    Trajectory traj(v->id, TrajectoryKind::kGroundTruth, v->history);
    bundle.detectors.push_back(
        {traj.front().lane, traj.front().t, DetectorKind::kArrival, v->id});
    const auto dep_t = traj.crossing_time(detector_x);
    bundle.detectors.push_back({traj.back().lane, dep_t.value_or(traj.back().t),
                                DetectorKind::kDeparture, v->id});
    truth.trajectories.push_back(std::move(traj));
  }
  truth.lc_events = std::move(lc_events);
  bundle.ground_truth = std::move(truth);
  std::sort(bundle.detectors.begin(), bundle.detectors.end(),
            [](const DetectorEvent& a, const DetectorEvent& b) {
              if (a.t != b.t) return a.t < b.t;
              if (a.lane != b.lane) return a.lane < b.lane;
              return a.kind == DetectorKind::kArrival && b.kind != DetectorKind::kArrival;
            });
  return bundle;
}

Observation degrade_to_observations(const ScenarioBundle& bundle,
                                    CvSelection rule) {
  if (!bundle.ground_truth.has_value())
    throw InvalidParameterError("cannot degrade a bundle without ground truth");
  const auto& truth = *bundle.ground_truth;
  Observation obs;
  obs.scenario.lanes = bundle.lanes;
  obs.scenario.signal = bundle.signal;
  obs.scenario.detector_position_m = bundle.detector_position_m;
  obs.answer_key = truth;

  for (const auto& e : bundle.detectors) {
    DetectorEvent stripped = e;
    stripped.vehicle_tag.reset();
    obs.scenario.detectors.push_back(stripped);
  }

  auto has_lc = [&](const std::string& id) {
    for (const auto& e : truth.lc_events)
      if (e.vehicle_id == id) return true;
    return false;
  };

  if (rule == CvSelection::kAll) {
    for (const auto& traj : truth.trajectories) {
      obs.scenario.cv_trajectories.emplace_back(
          traj.vehicle_id(), TrajectoryKind::kCvObserved, traj.samples());
    }
    return obs;
  }

  const double cycle = bundle.signal.cycle_length_s();
  double last_entry = 0.0;
  for (const auto& traj : truth.trajectories)
    last_entry = std::max(last_entry, traj.front().t);
  const int n_cycles = static_cast<int>(std::floor(last_entry / cycle)) + 1;

  for (const auto& lane : bundle.lanes) {
    for (int c = 0; c < n_cycles; ++c) {
      const Trajectory* pick = nullptr;
      bool lane_cycle_has_vehicle = false;
      for (const auto& traj : truth.trajectories) {
        if (traj.front().lane != lane.id) continue;
        const double t0 = traj.front().t;
        if (t0 < c * cycle || t0 >= (c + 1) * cycle) continue;
        lane_cycle_has_vehicle = true;
        if (has_lc(traj.vehicle_id())) continue;
        if (pick == nullptr || t0 < pick->front().t) pick = &traj;
      }
      if (pick != nullptr) {
        obs.scenario.cv_trajectories.emplace_back(
            pick->vehicle_id(), TrajectoryKind::kCvObserved, pick->samples());
      } else if (lane_cycle_has_vehicle) {
        std::ostringstream oss;
        oss << "no probe-eligible vehicle in lane " << lane.id << " cycle " << c;
        throw DegradationError(oss.str());
      }
    }
  }
  return obs;
}

}  // namespace artrec
