#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "artrec/conditions.hpp"
#include "artrec/physics.hpp"
#include "artrec/scenario.hpp"

namespace artrec {

/// Root-mean-square position difference over the steps where the real
/// trajectory is queued (speed below the stop threshold). Absent when the
/// real vehicle never queues inside the shared time support.
std::optional<double> compute_qe(const Trajectory& real, const Trajectory& rec,
                                 const IdmParams& p);

/// Root-mean-square position difference over the moving steps.
std::optional<double> compute_pe(const Trajectory& real, const Trajectory& rec,
                                 const IdmParams& p);

/// Root-mean-square crossing-time difference over block boundaries both
/// trajectories cross; crossing times by linear interpolation.
std::optional<double> compute_te(const Trajectory& real, const Trajectory& rec,
                                 const BlockGrid& grid);

/// Mean absolute block-index difference over paired lane changers.
double compute_be(const std::vector<int>& real_blocks,
                  const std::vector<int>& est_blocks);

/// Earliest block that is fully safety- and signal-feasible; falls back
/// to the most-feasible signal-clear block; nullopt when the signal
/// admits no block at all.
std::optional<int> baseline_rule_lcp(const std::vector<double>& safety,
                                     const std::vector<double>& signal_origin,
                                     const std::vector<double>& signal_target);

struct UtilityBaselineInputs {
  const Trajectory* origin_hyp = nullptr;
  const Trajectory* target_hyp = nullptr;
  std::vector<const Trajectory*> target_lane;  // other vehicles' paths
  std::vector<double> safety;
  std::vector<double> signal_origin;
  std::vector<double> signal_target;
  const BlockGrid* grid = nullptr;
  IdmParams idm;
  double politeness = 0.3;
  double threshold = 0.1;  // m/s^2 acceleration-gain bar
};

/// Acceleration-utility block choice: earliest feasible block where the
/// own acceleration gain in the target lane, less the politeness-weighted
/// deceleration imposed on the target-lane follower, exceeds the
/// threshold. Falls back to the rule-based choice.
std::optional<int> baseline_utility_lcp(const UtilityBaselineInputs& in);

struct VehicleMetrics {
  std::string vehicle_id;
  std::optional<double> qe, te, pe;
  bool is_lcv = false;
  LcType lc_type = LcType::kDiscretionary;
  std::optional<int> real_block, est_block;
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
};

struct BeRow {
  Aggregate all, mlc, dlc;
};

struct MetricReport {
  std::vector<VehicleMetrics> per_vehicle;
  Aggregate qe, te, pe;
  BeRow be;
  std::map<std::string, BeRow> baselines;  // e.g. "rule", "utility"
};

Aggregate aggregate(const std::vector<double>& values);

/// Aggregates per-vehicle metrics into the stratified report.
MetricReport build_report(std::vector<VehicleMetrics> per_vehicle,
                          const std::map<std::string, BeRow>& baselines = {});

/// Deterministic structured-text form of a report.
std::string serialize_report(const MetricReport& report);

/// Delimiter-separated table of the per-vehicle rows.
std::string report_to_csv(const MetricReport& report);

}  // namespace artrec
