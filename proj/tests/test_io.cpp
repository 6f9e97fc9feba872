#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "artrec/cli.hpp"
#include "artrec/io/config.hpp"
#include "artrec/io/scenario_io.hpp"
#include "artrec/io/svg.hpp"
#include "artrec/io/table.hpp"
#include "artrec/synth.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace artrec;
namespace fs = std::filesystem;

TEST_CASE("trajectory table parsing") {
  SUBCASE("minimal two-row file") {
    std::istringstream is(
        "# artrec-trajectory-table v1\n"
        "# units: m s mps\n"
        "# columns: vehicle_id time lane position speed\n"
        "veh1 0.0 1 0.0 10.0\n"
        "veh1 1.0 1 10.0 10.0\n");
    io::ParseReport report;
    const auto trajs = io::read_trajectory_table(is, &report);
    REQUIRE(trajs.size() == 1);
    CHECK(trajs[0].size() == 2);
    CHECK(report.rows == 2);
    CHECK(report.warnings == 0);
  }

  SUBCASE("feet positions convert to metres") {
    std::istringstream is(
        "# artrec-trajectory-table v1\n"
        "# units: ft s ftps\n"
        "# columns: vehicle_id time lane position speed\n"
        "v 0.0 1 0.0 30.0\n"
        "v 1.0 1 656.2 30.0\n");
    const auto trajs = io::read_trajectory_table(is);
    CHECK(trajs[0].back().x == doctest::Approx(200.0).epsilon(0.00025));
  }

  SUBCASE("frame-based timestamps") {
    std::istringstream is(
        "# artrec-trajectory-table v1\n"
        "# units: m s mps\n"
        "# frame_rate: 10\n"
        "# columns: vehicle_id frame lane position speed\n"
        "v 0 1 0.0 8.0\n"
        "v 5 1 4.0 8.0\n");
    const auto trajs = io::read_trajectory_table(is);
    CHECK(trajs[0].back().t == doctest::Approx(0.5));
  }

  SUBCASE("out-of-order rows are sorted with a warning") {
    std::istringstream is(
        "# artrec-trajectory-table v1\n"
        "# units: m s mps\n"
        "# columns: vehicle_id time lane position speed\n"
        "v 1.0 1 10.0 10.0\n"
        "v 0.0 1 0.0 10.0\n");
    io::ParseReport report;
    const auto trajs = io::read_trajectory_table(is, &report);
    CHECK(trajs[0].front().t == 0.0);
    CHECK(report.warnings == 1);
  }

  SUBCASE("duplicate timestamps are rejected") {
    std::istringstream is(
        "# artrec-trajectory-table v1\n"
        "# units: m s mps\n"
        "# columns: vehicle_id time lane position speed\n"
        "v 1.0 1 10.0 10.0\n"
        "v 1.0 1 11.0 10.0\n");
    CHECK_THROWS_AS(io::read_trajectory_table(is), ParseError);
  }

  SUBCASE("malformed rows carry line numbers") {
    std::istringstream is(
        "# columns: vehicle_id time lane position speed\n"
        "v abc 1 10.0 10.0\n");
    try {
      io::read_trajectory_table(is);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  SUBCASE("missing required column is a schema error") {
    std::istringstream is(
        "# columns: vehicle_id time lane position\n"
        "v 0.0 1 10.0\n");
    CHECK_THROWS_AS(io::read_trajectory_table(is), SchemaError);
  }

  SUBCASE("write-read round trip is the identity on canonical data") {
    SynthConfig cfg = two_lane_benchmark(5);
    cfg.cycles = 2;
    const auto bundle = generate_scenario(cfg);
    std::stringstream buf;
    io::write_trajectory_table(buf, bundle.ground_truth->trajectories);
    const auto loaded = io::read_trajectory_table(buf);
    REQUIRE(loaded.size() == bundle.ground_truth->trajectories.size());
    std::stringstream buf2;
    io::write_trajectory_table(buf2, loaded);
    CHECK(buf.str() == buf2.str());
  }
}

TEST_CASE("detector log round trip") {
  std::vector<DetectorEvent> events = {
      {1, 3.25, DetectorKind::kArrival, std::nullopt},
      {2, 9.5, DetectorKind::kDeparture, std::string("v7")},
  };
  std::stringstream buf;
  io::write_detector_log(buf, events);
  const auto loaded = io::read_detector_log(buf);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].kind == DetectorKind::kArrival);
  CHECK_FALSE(loaded[0].vehicle_tag.has_value());
  CHECK(loaded[1].vehicle_tag == std::string("v7"));
}

TEST_CASE("scenario directory round trip") {
  SynthConfig cfg = two_lane_benchmark(6);
  cfg.cycles = 2;
  auto labeled = generate_scenario(cfg);
  auto obs = degrade_to_observations(labeled);
  obs.scenario.ground_truth = obs.answer_key;

  const std::string dir = "/tmp/artrec_test_scenario";
  fs::remove_all(dir);
  io::save_scenario(dir, obs.scenario);
  const auto loaded = io::load_scenario(dir);
  CHECK(loaded.lanes.size() == 2);
  CHECK(loaded.signal.cycle_length_s() == doctest::Approx(60.0));
  CHECK(loaded.cv_trajectories.size() == obs.scenario.cv_trajectories.size());
  CHECK(loaded.detectors.size() == obs.scenario.detectors.size());
  REQUIRE(loaded.ground_truth.has_value());
  CHECK(loaded.ground_truth->trajectories.size() ==
        obs.answer_key.trajectories.size());
  CHECK(loaded.ground_truth->lc_events.size() == obs.answer_key.lc_events.size());
  CHECK_NOTHROW(loaded.validate());
}

TEST_CASE("run config layering") {
  io::RunConfig cfg = io::default_run_config();
  const double default_accel = cfg.pipeline.idm.max_accel;
  io::apply_config_json(R"({
    "idm": {"max_accel": 1.7},
    "train": {"epochs": 12, "mode": "sequential"},
    "synth": {"cycles": 3, "dlc_fraction": 0.5}
  })", &cfg);
  CHECK(cfg.pipeline.idm.max_accel == doctest::Approx(1.7));
  CHECK(cfg.pipeline.idm.max_accel != doctest::Approx(default_accel));
  CHECK(cfg.train.epochs == 12);
  CHECK(cfg.train.mode == TrainMode::kSequential);
  CHECK(cfg.synth.cycles == 3);
  // Untouched keys keep their defaults.
  CHECK(cfg.pipeline.idm.time_headway == doctest::Approx(1.5));
  CHECK_THROWS_AS(io::apply_config_json("{not json", &cfg), ParseError);
  CHECK_THROWS_AS(io::apply_config_json(R"({"train":{"mode":"x"}})", &cfg),
                  SchemaError);
}

namespace {

struct SvgScene {
  std::vector<LaneGeometry> lanes;
  std::vector<Trajectory> rec;
  std::vector<Trajectory> overlay;
  std::vector<LcEvent> events;
  SignalPlan signal;
};

SvgScene svg_scene() {
  SvgScene s;
  s.lanes = testing::two_through_lanes();
  s.signal = SignalPlan(60.0, {{{Movement::kThrough}, 30.0, 60.0}});
  std::vector<TrajectorySample> samples;
  for (int k = 0; k <= 20; ++k) {
    samples.push_back({static_cast<double>(k), 6.0 * k, 6.0,
                       k < 8 ? 1 : 2});
  }
  s.rec.emplace_back("lcv1", TrajectoryKind::kHvReconstructed, samples);
  s.rec.push_back(testing::uniform_trajectory("hv2", 2.0, 0.0, 8.0, 15.0, 1));
  s.overlay.push_back(testing::uniform_trajectory("t1", 0.0, 0.0, 6.1, 19.0, 1));
  s.events.push_back({"lcv1", 1, 2, 8, 8.0, LcType::kDiscretionary});
  return s;
}

}  // namespace

TEST_CASE("time-space diagram output") {
  const auto scene = svg_scene();
  std::stringstream a, b;
  io::write_timespace_svg(a, scene.lanes, scene.rec, scene.overlay, scene.events,
                          scene.signal);
  io::write_timespace_svg(b, scene.lanes, scene.rec, scene.overlay, scene.events,
                          scene.signal);
  CHECK(a.str() == b.str());  // byte-identical across runs
  const std::string svg = a.str();
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("red-phase") != std::string::npos);
  CHECK(svg.find("#e6c300") != std::string::npos);  // lane-changer colour
  CHECK(svg.find("#2e8b57") != std::string::npos);  // non-changer colour
  CHECK(svg.find("#999999") != std::string::npos);  // overlay colour

  // Empty overlay only drops the grey layer.
  std::stringstream c;
  io::write_timespace_svg(c, scene.lanes, scene.rec, {}, scene.events, scene.signal);
  CHECK(c.str().find("#999999") == std::string::npos);
  CHECK(c.str().find("#e6c300") != std::string::npos);
}

TEST_CASE("lane-change stars sit on their vehicle's polyline") {
  const auto scene = svg_scene();
  std::stringstream os;
  io::write_timespace_svg(os, scene.lanes, scene.rec, scene.overlay, scene.events,
                          scene.signal);
  const std::string svg = os.str();

  // Extract the star centre.
  std::smatch m;
  REQUIRE(std::regex_search(
      svg, m,
      std::regex("class=\"lcstar\" data-vehicle=\"lcv1\" "
                 "transform=\"translate\\(([-0-9.]+),([-0-9.]+)\\)")));
  const double sx = std::stod(m[1]);
  const double sy = std::stod(m[2]);

  // The star must lie within half a pixel of one of the vehicle's
  // polyline segments.
  double best = 1e9;
  const std::regex poly_re(
      "class=\"rec\" data-vehicle=\"lcv1\" points=\"([^\"]+)\"");
  auto begin = std::sregex_iterator(svg.begin(), svg.end(), poly_re);
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    std::istringstream pts((*it)[1]);
    std::vector<std::pair<double, double>> xy;
    std::string tok;
    while (pts >> tok) {
      const auto comma = tok.find(',');
      xy.push_back({std::stod(tok.substr(0, comma)),
                    std::stod(tok.substr(comma + 1))});
    }
    for (std::size_t i = 1; i < xy.size(); ++i) {
      const double ax = xy[i - 1].first, ay = xy[i - 1].second;
      const double bx = xy[i].first, by = xy[i].second;
      const double vx = bx - ax, vy = by - ay;
      const double len2 = vx * vx + vy * vy;
      double u = len2 > 0 ? ((sx - ax) * vx + (sy - ay) * vy) / len2 : 0.0;
      u = std::clamp(u, 0.0, 1.0);
      const double dx = sx - (ax + u * vx), dy = sy - (ay + u * vy);
      best = std::min(best, std::sqrt(dx * dx + dy * dy));
    }
  }
  CHECK(best <= 0.5);
}

TEST_CASE("command line surface") {
  const std::string out = "/tmp/artrec_test_cli";
  fs::remove_all(out);

  SUBCASE("unknown flags print usage and fail validation") {
    CHECK(cli::run({"synth", "--bogus"}) == 1);
    CHECK(cli::run({}) == 1);
  }

  SUBCASE("synth then deduce round trip") {
    // Tiny scenario through the config override.
    const std::string cfg_path = out + "_cfg.json";
    fs::create_directories(fs::path(cfg_path).parent_path());
    std::ofstream(cfg_path) << R"({"synth": {"cycles": 2}})";
    CHECK(cli::run({"synth", "--seed", "9", "--config", cfg_path, "--out", out}) == 0);
    CHECK(fs::exists(out + "/scenario/scenario.json"));
    CHECK(fs::exists(out + "/scenario/truth_trajectories.tsv"));
    CHECK(cli::run({"deduce", "--scenario", out + "/scenario", "--seed", "9",
                    "--out", out}) == 0);
    CHECK(fs::exists(out + "/deduction.tsv"));
  }

  SUBCASE("evaluate rejects mismatched vehicle counts") {
    const std::string cfg_path = out + "_cfg.json";
    std::ofstream(cfg_path) << R"({"synth": {"cycles": 2}})";
    REQUIRE(cli::run({"synth", "--seed", "11", "--config", cfg_path, "--out", out}) == 0);
    // A reconstructed table with a single vehicle cannot match.
    const auto trajs = io::load_trajectory_table(out + "/scenario/cv_trajectories.tsv");
    io::save_trajectory_table(out + "/partial.tsv", {trajs.front()});
    CHECK(cli::run({"evaluate", "--scenario", out + "/scenario",
                    "--reconstructed", out + "/partial.tsv", "--out", out}) == 1);
  }
}
