#include "artrec/io/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace artrec::io {

namespace {

using nlohmann::json;

void apply_idm(const json& j, IdmParams* p) {
  p->max_accel = j.value("max_accel", p->max_accel);
  p->comfort_decel = j.value("comfort_decel", p->comfort_decel);
  p->min_gap = j.value("min_gap", p->min_gap);
  p->time_headway = j.value("time_headway", p->time_headway);
  p->accel_exponent = j.value("accel_exponent", p->accel_exponent);
  p->desired_speed = j.value("desired_speed", p->desired_speed);
  p->dt = j.value("dt", p->dt);
  p->queue_spacing = j.value("queue_spacing", p->queue_spacing);
  p->vehicle_length = j.value("vehicle_length", p->vehicle_length);
  p->v_stop = j.value("v_stop", p->v_stop);
  p->stop_line_buffer = j.value("stop_line_buffer", p->stop_line_buffer);
  p->max_horizon_s = j.value("max_horizon_s", p->max_horizon_s);
}

void apply_safety(const json& j, SafetyParams* p) {
  p->accept_gap_m = j.value("accept_gap_m", p->accept_gap_m);
  p->critical_gap_m = j.value("critical_gap_m", p->critical_gap_m);
  p->beta0 = j.value("beta0", p->beta0);
  p->beta1 = j.value("beta1", p->beta1);
}

}  // namespace

void RunConfig::reseed(std::uint64_t seed) {
  synth.seed = seed;
  train.seed = seed;
}

RunConfig default_run_config() { return RunConfig{}; }

void apply_config_json(const std::string& json_text, RunConfig* cfg) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  try {
    if (j.contains("idm")) apply_idm(j["idm"], &cfg->pipeline.idm);
    if (j.contains("safety")) apply_safety(j["safety"], &cfg->pipeline.safety);
    if (j.contains("deduction")) {
      const auto& jd = j["deduction"];
      cfg->pipeline.deduction.window.half_width_s =
          jd.value("window_s", cfg->pipeline.deduction.window.half_width_s);
      cfg->pipeline.deduction.allow_non_adjacent_pairs = jd.value(
          "allow_non_adjacent", cfg->pipeline.deduction.allow_non_adjacent_pairs);
      cfg->pipeline.deduction.cv_match_tol_s =
          jd.value("cv_match_tol_s", cfg->pipeline.deduction.cv_match_tol_s);
    }
    if (j.contains("pipeline")) {
      const auto& jp = j["pipeline"];
      auto& p = cfg->pipeline;
      p.grid_resolution_m = jp.value("grid_resolution_m", p.grid_resolution_m);
      p.lc_channels = jp.value("lc_channels", p.lc_channels);
      p.lc_kernel = jp.value("lc_kernel", p.lc_kernel);
      p.traj_hidden = jp.value("traj_hidden", p.traj_hidden);
      p.traj_conv_channels = jp.value("traj_conv_channels", p.traj_conv_channels);
      p.max_step_headroom = jp.value("max_step_headroom", p.max_step_headroom);
      p.window_factor = jp.value("window_factor", p.window_factor);
      p.eval_draws = jp.value("eval_draws", p.eval_draws);
    }
    if (j.contains("train")) {
      const auto& jt = j["train"];
      auto& t = cfg->train;
      t.epochs = jt.value("epochs", t.epochs);
      t.batch_size = jt.value("batch_size", t.batch_size);
      t.lr_g = jt.value("lr_g", t.lr_g);
      t.lr_d = jt.value("lr_d", t.lr_d);
      t.adam_beta1 = jt.value("adam_beta1", t.adam_beta1);
      t.adam_beta2 = jt.value("adam_beta2", t.adam_beta2);
      t.omega_lc = jt.value("omega_lc", t.omega_lc);
      t.omega_traj = jt.value("omega_traj", t.omega_traj);
      t.clip_norm = jt.value("clip_norm", t.clip_norm);
      t.patience = jt.value("patience", t.patience);
      t.validation_fraction =
          jt.value("validation_fraction", t.validation_fraction);
      if (jt.contains("mode")) {
        const auto mode = jt["mode"].get<std::string>();
        if (mode == "joint")
          t.mode = TrainMode::kJoint;
        else if (mode == "sequential")
          t.mode = TrainMode::kSequential;
        else
          throw SchemaError("config: unknown train mode '" + mode + "'");
      }
    }
    if (j.contains("synth")) {
      const auto& js = j["synth"];
      if (js.contains("preset")) {
        const auto preset = js["preset"].get<std::string>();
        if (preset == "two_lane")
          cfg->synth = two_lane_benchmark(cfg->synth.seed);
        else if (preset == "three_lane")
          cfg->synth = three_lane_scenario(cfg->synth.seed);
        else
          throw SchemaError("config: unknown synth preset '" + preset + "'");
      }
      auto& s = cfg->synth;
      s.cycles = js.value("cycles", s.cycles);
      s.arrival_rates = js.value("arrival_rates", s.arrival_rates);
      s.headway_jitter = js.value("headway_jitter", s.headway_jitter);
      s.idm_jitter = js.value("idm_jitter", s.idm_jitter);
      s.mlc_probability = js.value("mlc_probability", s.mlc_probability);
      s.dlc_fraction = js.value("dlc_fraction", s.dlc_fraction);
      s.mixed_queue_tail_weight =
          js.value("mixed_queue_tail_weight", s.mixed_queue_tail_weight);
      s.grid_resolution_m = js.value("grid_resolution_m", s.grid_resolution_m);
      s.min_entry_headway_s = js.value("min_entry_headway_s", s.min_entry_headway_s);
      if (js.contains("dlc_rule")) {
        const auto rule = js["dlc_rule"].get<std::string>();
        if (rule == "queue_tail")
          s.dlc_rule = DlcRule::kQueueTail;
        else if (rule == "early_gap")
          s.dlc_rule = DlcRule::kEarlyGap;
        else if (rule == "mixed")
          s.dlc_rule = DlcRule::kMixed;
        else
          throw SchemaError("config: unknown dlc rule '" + rule + "'");
      }
      if (js.contains("driver")) apply_idm(js["driver"], &s.driver);
      if (js.contains("safety")) apply_safety(js["safety"], &s.safety);
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open config: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  RunConfig cfg = default_run_config();
  apply_config_json(buf.str(), &cfg);
  return cfg;
}

}  // namespace artrec::io
