#pragma once

#include <optional>
#include <set>
#include <vector>

#include "artrec/physics.hpp"
#include "artrec/scenario.hpp"

namespace artrec {

/// Temporal half-width used when pairing detector events with virtual
/// trajectory endpoints.
struct MatchWindow {
  double half_width_s = 5.0;
};

struct DeductionConfig {
  MatchWindow window;
  bool allow_non_adjacent_pairs = false;  // secondary lane-change pairs
  double cv_match_tol_s = 0.5;            // arrival-to-probe association
};

/// Virtual downstream endpoint of the car-following trajectory inferred
/// for one upstream arrival.
struct VirtualEndpoint {
  double di_time = 0.0;
  LaneId lane = 0;
  DetectorEvent arrival;
};

struct VehicleAssignment {
  DetectorEvent arrival;    // O_c
  DetectorEvent departure;  // D_c
  LaneId origin_lane = 0;
  LaneId target_lane = 0;
  int matched_step = 0;  // 1..4, provenance of the match
  bool is_lcv() const { return origin_lane != target_lane; }
};

struct DeductionResult {
  std::vector<VehicleAssignment> assignments;  // sorted by arrival time
  std::vector<DetectorEvent> unmatched;        // empty on success
  bool complete() const { return unmatched.empty(); }
  std::size_t lcv_count() const;
};

/// Mean of the observed probe speed on a lane and the configured
/// historical segment speed; falls back to the configured speed when the
/// lane has no moving probe samples.
double lane_desired_speed(const ScenarioBundle& scenario, LaneId lane,
                          const IdmParams& p);

/// Chains car-following hypotheticals down each lane (probe trajectories
/// anchor the chains) and records the time each one reaches the
/// downstream detector.
std::vector<VirtualEndpoint> infer_virtual_endpoints(const ScenarioBundle& scenario,
                                                     const IdmParams& p,
                                                     const DeductionConfig& cfg = {});

/// Intermediate state threaded through the matching steps.
struct MatchState {
  std::vector<VehicleAssignment> assignments;
  std::vector<VirtualEndpoint> residual_endpoints;
  std::vector<DetectorEvent> residual_departures;
  std::vector<DetectorEvent> residual_arrivals;  // populated after step 2
};

/// Step I: per-lane nearest-in-time pairing of departures with virtual
/// endpoints inside the window; matches are pre-queue non-LC vehicles.
MatchState step1_intra_lane(const ScenarioBundle& scenario,
                            const std::vector<VirtualEndpoint>& endpoints,
                            const MatchWindow& w, const IdmParams& p = {});

/// Step II: pairs leftover departures with virtual endpoints from
/// adjacent lanes; matches are pre-queue lane changers.
void step2_inter_lane(const ScenarioBundle& scenario, MatchState& state,
                      const MatchWindow& w, const IdmParams& p = {});

/// Step III result: in-order per-lane matches plus the surplus events
/// that remain lane-change candidates.
struct Step3Result {
  std::vector<VehicleAssignment> matched;
  std::vector<DetectorEvent> candidate_arrivals;
  std::vector<DetectorEvent> candidate_departures;
};

/// Step III: per-lane count comparison and in-order matching of the
/// queue-affected remainder. `leaveout_rotation` selects which surplus
/// events are held back as lane-change candidates (0 = the latest ones).
Step3Result step3_count_matching(const ScenarioBundle& scenario,
                                 const std::vector<DetectorEvent>& arrivals,
                                 const std::vector<DetectorEvent>& departures,
                                 const std::vector<int>& leaveout_rotation);

/// Ordered (arrival, departure) key used to forbid a cross-lane pairing.
using PairKey = std::pair<std::size_t, std::size_t>;

struct Step4Result {
  std::vector<VehicleAssignment> matched;
  bool ok = false;
  // On failure: the event that could not be paired feasibly.
  std::optional<DetectorEvent> stuck_event;
  std::optional<PairKey> offending_pair;
};

/// Step IV: chronologically nearest cross-lane pairing of the remaining
/// arrivals and departures, validated for physical feasibility.
Step4Result step4_cross_lane(const ScenarioBundle& scenario,
                             const std::vector<DetectorEvent>& arrivals,
                             const std::vector<DetectorEvent>& departures,
                             const IdmParams& p, const DeductionConfig& cfg,
                             const std::set<PairKey>& forbidden);

/// Full Algorithm: steps I-IV with the IV->III recalibration loop.
DeductionResult deduce_lcvs(const ScenarioBundle& scenario, const IdmParams& p,
                            const DeductionConfig& cfg = {});

}  // namespace artrec
