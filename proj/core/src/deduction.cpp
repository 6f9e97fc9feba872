#include "artrec/deduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace artrec {

namespace {

// Stable identity for a detector event, used in forbidden-pair bookkeeping.
std::size_t event_key(const DetectorEvent& e) {
  return static_cast<std::size_t>(e.lane) * 0x100000000ULL +
         static_cast<std::size_t>(std::llround(e.t * 1000.0) & 0xffffffffLL);
}

bool earlier(const DetectorEvent& a, const DetectorEvent& b) {
  if (a.t != b.t) return a.t < b.t;
  return a.lane < b.lane;
}

}  // namespace

std::size_t DeductionResult::lcv_count() const {
  std::size_t n = 0;
  for (const auto& a : assignments)
    if (a.is_lcv()) ++n;
  return n;
}

double lane_desired_speed(const ScenarioBundle& scenario, LaneId lane,
                          const IdmParams& p) {
  // 85th-percentile moving speed: queue-discharge creep would drag a
  // plain mean far below the running speed.
  std::vector<double> speeds;
  for (const auto& traj : scenario.cv_trajectories) {
    for (const auto& s : traj.samples()) {
      if (s.lane == lane && s.v >= p.v_stop) speeds.push_back(s.v);
    }
  }
  if (speeds.empty()) return p.desired_speed;
  std::sort(speeds.begin(), speeds.end());
  const std::size_t idx =
      static_cast<std::size_t>(0.85 * static_cast<double>(speeds.size() - 1));
  return 0.5 * (speeds[idx] + p.desired_speed);
}

namespace {

double min_travel_s(const ScenarioBundle& scenario, LaneId origin,
                    const IdmParams& p) {
  return scenario.segment_length_m() / (1.5 * lane_desired_speed(scenario, origin, p));
}

// Physical plausibility of assigning a departure to an arrival.
bool feasible_pair(const DetectorEvent& arr, const DetectorEvent& dep,
                   const ScenarioBundle& scenario, const IdmParams& p) {
  return dep.t > arr.t && dep.t - arr.t >= min_travel_s(scenario, arr.lane, p);
}

}  // namespace

std::vector<VirtualEndpoint> infer_virtual_endpoints(const ScenarioBundle& scenario,
                                                     const IdmParams& p,
                                                     const DeductionConfig& cfg) {
  std::vector<VirtualEndpoint> endpoints;
  const double detector_x = scenario.downstream_detector_m();
  for (const auto& lane : scenario.lanes) {
    auto arrivals = scenario.events(lane.id, DetectorKind::kArrival);
    if (arrivals.empty()) continue;

    IdmParams lane_params = p;
    lane_params.desired_speed = lane_desired_speed(scenario, lane.id, p);

    // Probe trajectories anchor the car-following chain in this lane.
    std::vector<const Trajectory*> probes;
    for (const auto& cv : scenario.cv_trajectories) {
      if (!cv.empty() && cv.front().lane == lane.id) probes.push_back(&cv);
    }

    const Trajectory* previous = nullptr;
    std::vector<Trajectory> generated;
    generated.reserve(arrivals.size());
    for (const auto& arrival : arrivals) {
      const Trajectory* own = nullptr;
      for (const Trajectory* cv : probes) {
        if (std::abs(cv->front().t - arrival.t) <= cfg.cv_match_tol_s) {
          own = cv;
          break;
        }
      }
      if (own == nullptr) {
        generated.push_back(generate_hypothetical_trajectory(
            arrival.t, lane, previous, scenario.signal, lane_params));
        own = &generated.back();
      }
      const auto di = own->crossing_time(detector_x);
      if (!di.has_value())
        throw InsufficientHorizonError(
            "virtual trajectory never reaches the downstream detector (lane " +
            std::to_string(lane.id) + ", arrival t=" + std::to_string(arrival.t) + ")");
      endpoints.push_back({*di, lane.id, arrival});
      previous = own;
    }
  }
  std::sort(endpoints.begin(), endpoints.end(),
            [](const VirtualEndpoint& a, const VirtualEndpoint& b) {
              if (a.di_time != b.di_time) return a.di_time < b.di_time;
              return a.lane < b.lane;
            });
  return endpoints;
}

MatchState step1_intra_lane(const ScenarioBundle& scenario,
                            const std::vector<VirtualEndpoint>& endpoints,
                            const MatchWindow& w, const IdmParams& p) {
  MatchState state;
  std::vector<bool> used(endpoints.size(), false);

  for (const auto& lane : scenario.lanes) {
    auto departures = scenario.events(lane.id, DetectorKind::kDeparture);
    // Departures leave a lane in arrival order (no in-lane overtaking), so
    // matches may never cross an already-used endpoint.
    double di_floor = -std::numeric_limits<double>::infinity();
    for (const auto& dep : departures) {
      int best = -1;
      double best_dt = w.half_width_s + 1.0;
      for (std::size_t i = 0; i < endpoints.size(); ++i) {
        if (used[i] || endpoints[i].lane != lane.id) continue;
        if (endpoints[i].di_time < di_floor) continue;
        const double d = std::abs(endpoints[i].di_time - dep.t);
        if (d > w.half_width_s) continue;
        if (!feasible_pair(endpoints[i].arrival, dep, scenario, p)) continue;
        if (d < best_dt - 1e-12 ||
            (std::abs(d - best_dt) <= 1e-12 && best >= 0 &&
             endpoints[i].di_time < endpoints[best].di_time)) {
          best = static_cast<int>(i);
          best_dt = d;
        }
      }
      if (best >= 0) {
        used[best] = true;
        di_floor = endpoints[best].di_time;
        state.assignments.push_back({endpoints[best].arrival, dep, lane.id,
                                     lane.id, 1});
      } else {
        state.residual_departures.push_back(dep);
      }
    }
  }
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    if (!used[i]) state.residual_endpoints.push_back(endpoints[i]);
  }
  std::sort(state.residual_departures.begin(), state.residual_departures.end(), earlier);
  return state;
}

void step2_inter_lane(const ScenarioBundle& scenario, MatchState& state,
                      const MatchWindow& w, const IdmParams& p) {
  std::vector<bool> used(state.residual_endpoints.size(), false);
  std::vector<DetectorEvent> still_unmatched;

  for (const auto& dep : state.residual_departures) {
    const auto& dep_lane = scenario.lane(dep.lane);
    int best = -1;
    double best_dt = w.half_width_s + 1.0;
    for (std::size_t i = 0; i < state.residual_endpoints.size(); ++i) {
      if (used[i]) continue;
      const auto& ve = state.residual_endpoints[i];
      if (!dep_lane.is_adjacent(ve.lane)) continue;
      const double d = std::abs(ve.di_time - dep.t);
      if (d > w.half_width_s) continue;
      if (!feasible_pair(ve.arrival, dep, scenario, p)) continue;
      const bool better =
          d < best_dt - 1e-12 ||
          (std::abs(d - best_dt) <= 1e-12 && best >= 0 &&
           (state.residual_endpoints[i].di_time <
                state.residual_endpoints[best].di_time ||
            (state.residual_endpoints[i].di_time ==
                 state.residual_endpoints[best].di_time &&
             ve.lane < state.residual_endpoints[best].lane)));
      if (better) {
        best = static_cast<int>(i);
        best_dt = d;
      }
    }
    if (best >= 0) {
      used[best] = true;
      const auto& ve = state.residual_endpoints[best];
      state.assignments.push_back({ve.arrival, dep, ve.lane, dep.lane, 2});
    } else {
      still_unmatched.push_back(dep);
    }
  }

  state.residual_departures = std::move(still_unmatched);
  std::vector<VirtualEndpoint> leftover;
  for (std::size_t i = 0; i < state.residual_endpoints.size(); ++i) {
    if (!used[i]) leftover.push_back(state.residual_endpoints[i]);
  }
  state.residual_endpoints = std::move(leftover);
  state.residual_arrivals.clear();
  for (const auto& ve : state.residual_endpoints)
    state.residual_arrivals.push_back(ve.arrival);
  std::sort(state.residual_arrivals.begin(), state.residual_arrivals.end(), earlier);
}

Step3Result step3_count_matching(const ScenarioBundle& scenario,
                                 const std::vector<DetectorEvent>& arrivals,
                                 const std::vector<DetectorEvent>& departures,
                                 const std::vector<int>& leaveout_rotation) {
  Step3Result result;
  for (std::size_t li = 0; li < scenario.lanes.size(); ++li) {
    const LaneId lane = scenario.lanes[li].id;
    std::vector<DetectorEvent> lane_arr, lane_dep;
    for (const auto& e : arrivals)
      if (e.lane == lane) lane_arr.push_back(e);
    for (const auto& e : departures)
      if (e.lane == lane) lane_dep.push_back(e);
    std::sort(lane_arr.begin(), lane_arr.end(), earlier);
    std::sort(lane_dep.begin(), lane_dep.end(), earlier);

    const int rotation =
        li < leaveout_rotation.size() ? leaveout_rotation[li] : 0;
    const std::size_t n_match = std::min(lane_arr.size(), lane_dep.size());

    // The surplus side's held-back events become lane-change candidates;
    // by default the latest ones, shifted cyclically on recalibration.
    auto pick_leaveout = [&](std::size_t n, std::size_t k) {
      std::vector<bool> out(n, false);
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t idx =
            (n - 1 - (static_cast<std::size_t>(rotation) + j) % n + n) % n;
        out[idx] = true;
      }
      return out;
    };

    std::vector<DetectorEvent> match_arr, match_dep;
    if (lane_arr.size() > lane_dep.size()) {
      const auto skip = pick_leaveout(lane_arr.size(),
                                      lane_arr.size() - lane_dep.size());
      for (std::size_t i = 0; i < lane_arr.size(); ++i) {
        if (skip[i])
          result.candidate_arrivals.push_back(lane_arr[i]);
        else
          match_arr.push_back(lane_arr[i]);
      }
      match_dep = lane_dep;
    } else if (lane_dep.size() > lane_arr.size()) {
      const auto skip = pick_leaveout(lane_dep.size(),
                                      lane_dep.size() - lane_arr.size());
      for (std::size_t i = 0; i < lane_dep.size(); ++i) {
        if (skip[i])
          result.candidate_departures.push_back(lane_dep[i]);
        else
          match_dep.push_back(lane_dep[i]);
      }
      match_arr = lane_arr;
    } else {
      match_arr = lane_arr;
      match_dep = lane_dep;
    }

    for (std::size_t i = 0; i < n_match; ++i) {
      result.matched.push_back({match_arr[i], match_dep[i], lane, lane, 3});
    }
  }
  return result;
}

Step4Result step4_cross_lane(const ScenarioBundle& scenario,
                             const std::vector<DetectorEvent>& arrivals,
                             const std::vector<DetectorEvent>& departures,
                             const IdmParams& p, const DeductionConfig& cfg,
                             const std::set<PairKey>& forbidden) {
  Step4Result result;
  std::vector<DetectorEvent> arr = arrivals;
  std::sort(arr.begin(), arr.end(), earlier);
  std::vector<bool> used(departures.size(), false);

  for (const auto& oc : arr) {
    const auto& origin_lane = scenario.lane(oc.lane);
    int best = -1;
    double best_dt = 0.0;
    int nearest_infeasible = -1;
    double nearest_infeasible_dt = 0.0;
    for (std::size_t i = 0; i < departures.size(); ++i) {
      if (used[i]) continue;
      const auto& dc = departures[i];
      if (dc.lane == oc.lane) continue;
      if (!cfg.allow_non_adjacent_pairs && !origin_lane.is_adjacent(dc.lane))
        continue;
      if (forbidden.count({event_key(oc), event_key(dc)})) continue;
      const double d = std::abs(dc.t - oc.t);
      // Physical feasibility first: departure after arrival with an
      // implied average speed no greater than 1.5x the desired speed.
      if (!feasible_pair(oc, dc, scenario, p)) {
        if (nearest_infeasible < 0 || d < nearest_infeasible_dt) {
          nearest_infeasible = static_cast<int>(i);
          nearest_infeasible_dt = d;
        }
        continue;
      }
      const bool better =
          best < 0 || d < best_dt - 1e-12 ||
          (std::abs(d - best_dt) <= 1e-12 &&
           (dc.t < departures[best].t ||
            (dc.t == departures[best].t && dc.lane < departures[best].lane)));
      if (better) {
        best = static_cast<int>(i);
        best_dt = d;
      }
    }
    if (best < 0) {
      // An implausible-only neighborhood still reports the pairing so the
      // caller can forbid it and recalibrate.
      if (nearest_infeasible >= 0) {
        result.offending_pair =
            PairKey{event_key(oc), event_key(departures[nearest_infeasible])};
      }
      result.stuck_event = oc;
      return result;
    }
    used[best] = true;
    result.matched.push_back({oc, departures[best], oc.lane,
                              departures[best].lane, 4});
  }

  for (std::size_t i = 0; i < departures.size(); ++i) {
    if (!used[i]) {
      result.stuck_event = departures[i];
      return result;
    }
  }
  result.ok = true;
  return result;
}

namespace {

void erase_event(std::vector<DetectorEvent>* events, const DetectorEvent& e) {
  for (auto it = events->begin(); it != events->end(); ++it) {
    if (it->lane == e.lane && it->kind == e.kind &&
        std::abs(it->t - e.t) < 1e-12) {
      events->erase(it);
      return;
    }
  }
}

// Last-resort recalibration for a candidate no cross-lane partner can
// serve: it takes over the nearest serviceable same-lane step-I match and
// is reclassified as a non-changer; the displaced counterpart re-enters
// the residual pool. Returns false when nothing can be displaced.
bool displace_step1_match(const ScenarioBundle& scenario, const IdmParams& p,
                          const DetectorEvent& stuck, MatchState* state) {
  int best = -1;
  double best_t = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < state->assignments.size(); ++i) {
    const auto& a = state->assignments[i];
    if (a.matched_step != 1 || a.origin_lane != stuck.lane) continue;
    const bool serves = stuck.kind == DetectorKind::kArrival
                            ? feasible_pair(stuck, a.departure, scenario, p)
                            : feasible_pair(a.arrival, stuck, scenario, p);
    if (!serves) continue;
    // Nearest after the stuck arrival / nearest before the stuck departure.
    const double key = stuck.kind == DetectorKind::kArrival
                           ? a.departure.t
                           : -a.arrival.t;
    if (key < best_t) {
      best_t = key;
      best = static_cast<int>(i);
    }
  }
  if (best >= 0) {
    VehicleAssignment displaced = state->assignments[best];
    state->assignments.erase(state->assignments.begin() + best);
    if (stuck.kind == DetectorKind::kArrival) {
      state->assignments.push_back(
          {stuck, displaced.departure, stuck.lane, stuck.lane, 3});
      erase_event(&state->residual_arrivals, stuck);
      state->residual_arrivals.push_back(displaced.arrival);
    } else {
      state->assignments.push_back(
          {displaced.arrival, stuck, stuck.lane, stuck.lane, 3});
      erase_event(&state->residual_departures, stuck);
      state->residual_departures.push_back(displaced.departure);
    }
    std::sort(state->residual_arrivals.begin(), state->residual_arrivals.end(),
              earlier);
    std::sort(state->residual_departures.begin(),
              state->residual_departures.end(), earlier);
    return true;
  }

  // No same-lane candidate: take the counterpart from an adjacent lane's
  // step-I match, binding the orphan as a lane-change pair; the leftover
  // half re-enters the pool to serve that lane's own surplus.
  best = -1;
  best_t = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < state->assignments.size(); ++i) {
    const auto& a = state->assignments[i];
    if (a.matched_step != 1) continue;
    if (!scenario.lane(stuck.lane).is_adjacent(a.origin_lane)) continue;
    const bool serves = stuck.kind == DetectorKind::kArrival
                            ? feasible_pair(stuck, a.departure, scenario, p)
                            : feasible_pair(a.arrival, stuck, scenario, p);
    if (!serves) continue;
    // Latest arrival before a stuck departure / earliest departure after a
    // stuck arrival: the most plausible travel time.
    const double key = stuck.kind == DetectorKind::kArrival
                           ? a.departure.t
                           : -a.arrival.t;
    if (key < best_t) {
      best_t = key;
      best = static_cast<int>(i);
    }
  }
  if (best < 0) return false;
  VehicleAssignment displaced = state->assignments[best];
  state->assignments.erase(state->assignments.begin() + best);
  if (stuck.kind == DetectorKind::kArrival) {
    state->assignments.push_back(
        {stuck, displaced.departure, stuck.lane, displaced.departure.lane, 4});
    erase_event(&state->residual_arrivals, stuck);
    state->residual_arrivals.push_back(displaced.arrival);
  } else {
    state->assignments.push_back(
        {displaced.arrival, stuck, displaced.arrival.lane, stuck.lane, 4});
    erase_event(&state->residual_departures, stuck);
    state->residual_departures.push_back(displaced.departure);
  }
  std::sort(state->residual_arrivals.begin(), state->residual_arrivals.end(),
            earlier);
  std::sort(state->residual_departures.begin(), state->residual_departures.end(),
            earlier);
  return true;
}

}  // namespace

DeductionResult deduce_lcvs(const ScenarioBundle& full_scenario,
                            const IdmParams& p, const DeductionConfig& cfg) {
  // Probes broadcast their full trajectories: their detector events are
  // identified, not inferred. Pin them as in-lane assignments up front so
  // window matching cannot reassign a probe's slot.
  std::vector<VehicleAssignment> pinned;
  ScenarioBundle scenario = full_scenario;
  {
    const double detector_x = full_scenario.downstream_detector_m();
    std::vector<bool> taken(scenario.detectors.size(), false);
    auto claim = [&](LaneId lane, double t, DetectorKind kind) -> int {
      int best = -1;
      double best_dt = cfg.cv_match_tol_s;
      for (std::size_t i = 0; i < scenario.detectors.size(); ++i) {
        const auto& e = scenario.detectors[i];
        if (taken[i] || e.lane != lane || e.kind != kind) continue;
        const double d = std::abs(e.t - t);
        if (d <= best_dt) {
          best_dt = d;
          best = static_cast<int>(i);
        }
      }
      return best;
    };
    for (const auto& cv : full_scenario.cv_trajectories) {
      if (cv.empty()) continue;
      const auto dep_t = cv.crossing_time(detector_x);
      if (!dep_t.has_value()) continue;
      const int ai = claim(cv.front().lane, cv.front().t, DetectorKind::kArrival);
      const int di = claim(cv.back().lane, *dep_t, DetectorKind::kDeparture);
      if (ai < 0 || di < 0) continue;
      taken[ai] = true;
      taken[di] = true;
      // Step 0: identified, never displaced by later recalibration.
      pinned.push_back({scenario.detectors[ai], scenario.detectors[di],
                        cv.front().lane, cv.back().lane, 0});
    }
    if (!pinned.empty()) {
      std::vector<DetectorEvent> remaining;
      for (std::size_t i = 0; i < scenario.detectors.size(); ++i)
        if (!taken[i]) remaining.push_back(scenario.detectors[i]);
      scenario.detectors = std::move(remaining);
    }
  }

  // Endpoints come from the full event set (probe arrivals anchor the
  // car-following chains), then the pinned ones drop out of the pool.
  auto endpoints = infer_virtual_endpoints(full_scenario, p, cfg);
  {
    std::vector<VirtualEndpoint> filtered;
    for (const auto& ve : endpoints) {
      bool is_pinned = false;
      for (const auto& a : pinned) {
        if (ve.arrival.lane == a.arrival.lane &&
            std::abs(ve.arrival.t - a.arrival.t) < 1e-9) {
          is_pinned = true;
          break;
        }
      }
      if (!is_pinned) filtered.push_back(ve);
    }
    endpoints = std::move(filtered);
  }

  MatchState state = step1_intra_lane(scenario, endpoints, cfg.window, p);
  step2_inter_lane(scenario, state, cfg.window, p);
  state.assignments.insert(state.assignments.end(), pinned.begin(), pinned.end());

  std::vector<int> rotations(scenario.lanes.size(), 0);
  std::set<PairKey> forbidden;
  const std::size_t residual_count =
      state.residual_arrivals.size() + state.residual_departures.size();
  const std::size_t cap = std::max<std::size_t>(4, (residual_count + 2) *
                                                       (residual_count + 2)) +
                          16 * state.assignments.size() + 128;

  auto lane_index = [&](LaneId id) {
    for (std::size_t i = 0; i < scenario.lanes.size(); ++i)
      if (scenario.lanes[i].id == id) return i;
    return std::size_t{0};
  };
  auto lane_residuals = [&](LaneId id) {
    std::size_t n = 0;
    for (const auto& e : state.residual_arrivals)
      if (e.lane == id) ++n;
    for (const auto& e : state.residual_departures)
      if (e.lane == id) ++n;
    return n;
  };

  for (std::size_t iter = 0; iter < cap; ++iter) {
    const auto s3 = step3_count_matching(scenario, state.residual_arrivals,
                                         state.residual_departures, rotations);

    // In-order matches must at least respect causality; otherwise the
    // hold-back choice was wrong and the lane needs recalibration, first
    // by a different hold-back, then by displacing a step-I match.
    bool s3_ok = true;
    for (const auto& m : s3.matched) {
      if (m.departure.t <= m.arrival.t) {
        s3_ok = false;
        const std::size_t li = lane_index(m.origin_lane);
        if (rotations[li] <
            std::min<int>(4, static_cast<int>(lane_residuals(m.origin_lane)))) {
          rotations[li] += 1;
          break;
        }
        if (displace_step1_match(scenario, p, m.departure, &state) ||
            displace_step1_match(scenario, p, m.arrival, &state)) {
          std::fill(rotations.begin(), rotations.end(), 0);
          forbidden.clear();
        }
        break;
      }
    }
    if (!s3_ok) continue;

    const auto s4 = step4_cross_lane(scenario, s3.candidate_arrivals,
                                     s3.candidate_departures, p, cfg, forbidden);
    if (s4.ok) {
      DeductionResult result;
      result.assignments = state.assignments;
      result.assignments.insert(result.assignments.end(), s3.matched.begin(),
                                s3.matched.end());
      result.assignments.insert(result.assignments.end(), s4.matched.begin(),
                                s4.matched.end());
      std::sort(result.assignments.begin(), result.assignments.end(),
                [](const VehicleAssignment& a, const VehicleAssignment& b) {
                  if (a.arrival.t != b.arrival.t) return a.arrival.t < b.arrival.t;
                  return a.arrival.lane < b.arrival.lane;
                });
      return result;
    }
    if (s4.stuck_event.has_value()) {
      const std::size_t li = lane_index(s4.stuck_event->lane);
      // A lane with residuals on both sides first tries different
      // hold-back choices; otherwise step-I matches are displaced.
      bool has_arr = false, has_dep = false;
      for (const auto& e : state.residual_arrivals)
        if (e.lane == s4.stuck_event->lane) has_arr = true;
      for (const auto& e : state.residual_departures)
        if (e.lane == s4.stuck_event->lane) has_dep = true;
      if (has_arr && has_dep &&
          rotations[li] < std::min<int>(4, static_cast<int>(lane_residuals(
                                               s4.stuck_event->lane)))) {
        rotations[li] += 1;
        continue;
      }
      // Earliest-deadline-first repair: the earliest unserved candidate is
      // the binding constraint; displacing its lane's step-I match marches
      // the orphan times toward a consistent pairing.
      std::vector<DetectorEvent> unserved = s3.candidate_arrivals;
      unserved.insert(unserved.end(), s3.candidate_departures.begin(),
                      s3.candidate_departures.end());
      std::sort(unserved.begin(), unserved.end(), earlier);
      bool displaced = false;
      for (const auto& e : unserved) {
        bool served = false;
        for (const auto& m : s4.matched) {
          if ((e.kind == DetectorKind::kArrival &&
               std::abs(m.arrival.t - e.t) < 1e-12 && m.arrival.lane == e.lane) ||
              (e.kind == DetectorKind::kDeparture &&
               std::abs(m.departure.t - e.t) < 1e-12 &&
               m.departure.lane == e.lane)) {
            served = true;
            break;
          }
        }
        if (served) continue;
        if (displace_step1_match(scenario, p, e, &state)) {
          displaced = true;
          break;
        }
      }
      if (displaced) {
        // The pool changed shape: stale search state no longer applies.
        std::fill(rotations.begin(), rotations.end(), 0);
        forbidden.clear();
        continue;
      }
      if (s4.offending_pair.has_value() &&
          !forbidden.count(*s4.offending_pair)) {
        forbidden.insert(*s4.offending_pair);
        continue;
      }
      break;  // nothing left to recalibrate
    }
  }

  // The revert loop exhausted its budget: saturated scenes with dense
  // discharge headways can leave a small mutually-inconsistent kernel.
  // Complete it under causality alone (in-lane FIFO first, then adjacent
  // lanes), swapping existing assignments when a leftover has no causal
  // partner in the pool. Swaps push pool arrivals earlier and departures
  // later, so the loop terminates.
  const std::size_t completion_cap = 40 * (state.assignments.size() +
                                          state.residual_arrivals.size() +
                                          state.residual_departures.size()) + 8;
  for (std::size_t round = 0; round < completion_cap; ++round) {
    auto arrs = state.residual_arrivals;
    auto deps = state.residual_departures;
    std::sort(arrs.begin(), arrs.end(), earlier);
    std::sort(deps.begin(), deps.end(), earlier);
    std::vector<bool> arr_used(arrs.size(), false);
    std::vector<bool> dep_used(deps.size(), false);
    std::vector<VehicleAssignment> paired;

    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t d = 0; d < deps.size(); ++d) {
        if (dep_used[d]) continue;
        for (std::size_t a = 0; a < arrs.size(); ++a) {
          if (arr_used[a]) continue;
          if (arrs[a].t >= deps[d].t) break;  // sorted: no later arrival fits
          const bool same = arrs[a].lane == deps[d].lane;
          const bool adjacent =
              scenario.lane(arrs[a].lane).is_adjacent(deps[d].lane);
          if (pass == 0 ? !same : !adjacent) continue;
          arr_used[a] = true;
          dep_used[d] = true;
          paired.push_back({arrs[a], deps[d], arrs[a].lane, deps[d].lane,
                            pass == 0 ? 3 : 4});
          break;
        }
      }
    }

    std::vector<DetectorEvent> leftovers;
    for (std::size_t a = 0; a < arrs.size(); ++a)
      if (!arr_used[a]) leftovers.push_back(arrs[a]);
    for (std::size_t d = 0; d < deps.size(); ++d)
      if (!dep_used[d]) leftovers.push_back(deps[d]);

    if (leftovers.empty()) {
      DeductionResult result;
      result.assignments = state.assignments;
      result.assignments.insert(result.assignments.end(), paired.begin(),
                                paired.end());
      std::sort(result.assignments.begin(), result.assignments.end(),
                [](const VehicleAssignment& a, const VehicleAssignment& b) {
                  if (a.arrival.t != b.arrival.t) return a.arrival.t < b.arrival.t;
                  return a.arrival.lane < b.arrival.lane;
                });
      return result;
    }

    // Swap the earliest leftover into an assignment that can serve it.
    std::sort(leftovers.begin(), leftovers.end(), earlier);
    bool swapped = false;
    for (const auto& lo : leftovers) {
      int best = -1;
      double best_key = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < state.assignments.size(); ++i) {
        const auto& a = state.assignments[i];
        const bool lane_ok =
            lo.lane == (lo.kind == DetectorKind::kArrival ? a.departure.lane
                                                          : a.arrival.lane) ||
            scenario.lane(lo.lane).is_adjacent(
                lo.kind == DetectorKind::kArrival ? a.departure.lane
                                                  : a.arrival.lane);
        if (!lane_ok) continue;
        const bool causal = lo.kind == DetectorKind::kArrival
                                ? a.departure.t > lo.t
                                : a.arrival.t < lo.t;
        if (!causal) continue;
        // Release the resource the pool is short of: the earliest arrival
        // when serving a leftover arrival, the latest departure when
        // serving a leftover departure.
        const double key = lo.kind == DetectorKind::kArrival
                               ? a.arrival.t
                               : -a.departure.t;
        if (key < best_key) {
          best_key = key;
          best = static_cast<int>(i);
        }
      }
      if (best < 0) continue;
      VehicleAssignment old = state.assignments[best];
      state.assignments.erase(state.assignments.begin() + best);
      if (lo.kind == DetectorKind::kArrival) {
        const LaneId dep_lane = old.departure.lane;
        state.assignments.push_back({lo, old.departure, lo.lane, dep_lane,
                                     lo.lane == dep_lane ? 3 : 4});
        erase_event(&state.residual_arrivals, lo);
        state.residual_arrivals.push_back(old.arrival);
      } else {
        const LaneId arr_lane = old.arrival.lane;
        state.assignments.push_back({old.arrival, lo, arr_lane, lo.lane,
                                     arr_lane == lo.lane ? 3 : 4});
        erase_event(&state.residual_departures, lo);
        state.residual_departures.push_back(old.departure);
      }
      swapped = true;
      break;
    }
    if (!swapped) break;
  }

  std::ostringstream oss;
  oss << "detector-event matching failed after " << cap << " recalibrations; "
      << state.residual_arrivals.size() << " arrivals and "
      << state.residual_departures.size() << " departures unresolved";
  throw DeductionFailureError(oss.str());
}

}  // namespace artrec
