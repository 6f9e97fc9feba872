#include "artrec/io/scenario_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "artrec/io/table.hpp"
#include "json.hpp"

namespace artrec::io {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json signal_to_json(const SignalPlan& plan) {
  json phases = json::array();
  for (const auto& ph : plan.phases()) {
    json movements = json::array();
    for (auto m : ph.movements) movements.push_back(to_string(m));
    phases.push_back({{"movements", movements},
                      {"green_start_s", ph.green_start_s},
                      {"green_end_s", ph.green_end_s}});
  }
  return {{"cycle_length_s", plan.cycle_length_s()},
          {"cycle_origin_s", plan.cycle_origin_s()},
          {"phases", phases}};
}

SignalPlan signal_from_json(const json& j) {
  std::vector<SignalPhase> phases;
  for (const auto& jp : j.at("phases")) {
    SignalPhase ph;
    for (const auto& m : jp.at("movements"))
      ph.movements.push_back(movement_from_string(m.get<std::string>()));
    ph.green_start_s = jp.at("green_start_s").get<double>();
    ph.green_end_s = jp.at("green_end_s").get<double>();
    phases.push_back(std::move(ph));
  }
  return SignalPlan(j.at("cycle_length_s").get<double>(), std::move(phases),
                    j.value("cycle_origin_s", 0.0));
}

}  // namespace

std::string scenario_json(const ScenarioBundle& bundle) {
  json lanes = json::array();
  for (const auto& l : bundle.lanes) {
    lanes.push_back({{"id", l.id},
                     {"movement", to_string(l.movement)},
                     {"segment_length_m", l.segment_length_m},
                     {"adjacent", l.adjacent}});
  }
  json j = {{"format", "artrec-scenario v1"},
            {"lanes", lanes},
            {"signal", signal_to_json(bundle.signal)},
            {"detector_position_m", bundle.detector_position_m}};
  return j.dump(2) + "\n";
}

void apply_scenario_json(const std::string& json_text, ScenarioBundle* bundle) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario.json: ") + e.what());
  }
  try {
    bundle->lanes.clear();
    for (const auto& jl : j.at("lanes")) {
      LaneGeometry lane;
      lane.id = jl.at("id").get<LaneId>();
      lane.movement = movement_from_string(jl.at("movement").get<std::string>());
      lane.segment_length_m = jl.at("segment_length_m").get<double>();
      lane.adjacent = jl.value("adjacent", std::vector<LaneId>{});
      bundle->lanes.push_back(std::move(lane));
    }
    bundle->signal = signal_from_json(j.at("signal"));
    bundle->detector_position_m = j.value("detector_position_m", -1.0);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("scenario.json: ") + e.what());
  }
}

void save_scenario(const std::string& dir, const ScenarioBundle& bundle) {
  fs::create_directories(dir);
  {
    std::ofstream os(dir + "/scenario.json", std::ios::binary);
    if (!os) throw IoError("cannot write " + dir + "/scenario.json");
    os << scenario_json(bundle);
  }
  save_trajectory_table(dir + "/cv_trajectories.tsv", bundle.cv_trajectories);
  save_detector_log(dir + "/detectors.tsv", bundle.detectors);
  if (bundle.ground_truth.has_value()) {
    save_trajectory_table(dir + "/truth_trajectories.tsv",
                          bundle.ground_truth->trajectories);
    save_lc_events(dir + "/truth_lc_events.tsv", bundle.ground_truth->lc_events);
  }
}

ScenarioBundle load_scenario(const std::string& dir) {
  std::ifstream is(dir + "/scenario.json", std::ios::binary);
  if (!is) throw IoError("cannot open " + dir + "/scenario.json");
  std::stringstream buf;
  buf << is.rdbuf();
  ScenarioBundle bundle;
  apply_scenario_json(buf.str(), &bundle);
  bundle.cv_trajectories = load_trajectory_table(dir + "/cv_trajectories.tsv");
  bundle.detectors = load_detector_log(dir + "/detectors.tsv");
  if (fs::exists(dir + "/truth_trajectories.tsv")) {
    GroundTruth truth;
    truth.trajectories = load_trajectory_table(dir + "/truth_trajectories.tsv");
    for (auto& t : truth.trajectories) {
      t = Trajectory(t.vehicle_id(), TrajectoryKind::kGroundTruth, t.samples());
    }
    if (fs::exists(dir + "/truth_lc_events.tsv"))
      truth.lc_events = load_lc_events(dir + "/truth_lc_events.tsv");
    bundle.ground_truth = std::move(truth);
  }
  return bundle;
}

}  // namespace artrec::io
