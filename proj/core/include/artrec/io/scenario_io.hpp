#pragma once

#include <string>

#include "artrec/scenario.hpp"

namespace artrec::io {

/// Directory layout: scenario.json (lanes, signal, detector position),
/// cv_trajectories.tsv, detectors.tsv, and - when ground truth is kept -
/// truth_trajectories.tsv + truth_lc_events.tsv.
void save_scenario(const std::string& dir, const ScenarioBundle& bundle);
ScenarioBundle load_scenario(const std::string& dir);

std::string scenario_json(const ScenarioBundle& bundle);
void apply_scenario_json(const std::string& json_text, ScenarioBundle* bundle);

}  // namespace artrec::io
