#pragma once

#include <cstdint>
#include <vector>

#include "artrec/conditions.hpp"
#include "artrec/physics.hpp"
#include "artrec/scenario.hpp"

namespace artrec {

enum class DlcRule { kQueueTail, kEarlyGap, kMixed };

/// Configuration of the seeded synthetic corridor generator. Driver
/// parameters are the population means the simulated drivers are jittered
/// around; they need not coincide with the defaults the reconstruction
/// pipeline assumes.
struct SynthConfig {
  std::vector<LaneGeometry> lanes;
  SignalPlan signal;
  int cycles = 10;
  std::vector<double> arrival_rates;  // veh per lane per cycle
  double headway_jitter = 0.3;        // fraction of the mean headway
  double idm_jitter = 0.15;           // +- fraction on driver parameters
  double mlc_probability = 0.0;       // wrong-lane entrants near a turn lane
  DlcRule dlc_rule = DlcRule::kQueueTail;
  double dlc_fraction = 0.5;          // eligible vehicles wanting a lane change
  double mixed_queue_tail_weight = 0.5;
  std::uint64_t seed = 42;

  IdmParams driver;       // population mean driving parameters
  SafetyParams safety;    // shared gap-acceptance parameters
  double grid_resolution_m = 6.0;
  double min_entry_headway_s = 2.0;

  void validate() const;
};

/// 2 through lanes, 120 m, 60 s cycle: the queue_tail learning benchmark.
SynthConfig two_lane_benchmark(std::uint64_t seed);

/// Left-turn lane plus two through lanes; exercises mandatory changes.
SynthConfig three_lane_scenario(std::uint64_t seed);

/// Simulates the corridor and returns a fully labeled bundle: complete
/// trajectories, lane-change events, and tagged detector events. No probe
/// selection has happened yet (cv_trajectories is empty).
ScenarioBundle generate_scenario(const SynthConfig& cfg);

enum class CvSelection { kFirstPerLaneCycle, kAll };

struct Observation {
  ScenarioBundle scenario;  // detector events untagged, probes selected
  GroundTruth answer_key;
};

/// Hides everything except the selected probe trajectories and unlabeled
/// detector timestamps; the ground truth moves into the sealed answer key.
Observation degrade_to_observations(const ScenarioBundle& bundle,
                                    CvSelection rule = CvSelection::kFirstPerLaneCycle);

}  // namespace artrec
