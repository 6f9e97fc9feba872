#include "artrec/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "artrec/deduction.hpp"
#include "artrec/io/config.hpp"
#include "artrec/io/scenario_io.hpp"
#include "artrec/io/svg.hpp"
#include "artrec/io/table.hpp"
#include "artrec/metrics.hpp"
#include "artrec/nn/checkpoint.hpp"
#include "artrec/synth.hpp"
#include "artrec/trainer.hpp"

namespace artrec::cli {

namespace {

namespace fs = std::filesystem;

struct GlobalOpts {
  std::uint64_t seed = 42;
  std::string config_path;
  std::string out;
};

io::RunConfig make_config(const GlobalOpts& g) {
  io::RunConfig cfg = g.config_path.empty() ? io::default_run_config()
                                            : io::load_run_config(g.config_path);
  cfg.reseed(g.seed);
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << text;
}

// Observation view of a stored scenario: the answer key travels in the
// same directory but never feeds the estimation path.
Observation split_observation(ScenarioBundle bundle) {
  Observation obs;
  if (bundle.ground_truth.has_value()) {
    obs.answer_key = std::move(*bundle.ground_truth);
    bundle.ground_truth.reset();
  }
  obs.scenario = std::move(bundle);
  return obs;
}

int cmd_synth(const GlobalOpts& g) {
  io::RunConfig cfg = make_config(g);
  ScenarioBundle labeled = generate_scenario(cfg.synth);
  Observation obs = degrade_to_observations(labeled);
  obs.scenario.ground_truth = obs.answer_key;
  io::save_scenario(g.out + "/scenario", obs.scenario);
  std::cout << "synth: " << obs.answer_key.trajectories.size() << " vehicles, "
            << obs.answer_key.lc_events.size() << " lane changes, "
            << obs.scenario.cv_trajectories.size() << " probes -> " << g.out
            << "/scenario\n";
  return 0;
}

std::string deduction_report(const DeductionResult& result) {
  std::ostringstream os;
  os << "# artrec-deduction v1\n";
  os << "# columns: arrival_t arrival_lane departure_t departure_lane origin "
        "target step lcv\n";
  char line[160];
  for (const auto& a : result.assignments) {
    std::snprintf(line, sizeof(line), "%.6f %d %.6f %d %d %d %d %d\n",
                  a.arrival.t, a.arrival.lane, a.departure.t, a.departure.lane,
                  a.origin_lane, a.target_lane, a.matched_step,
                  a.is_lcv() ? 1 : 0);
    os << line;
  }
  return os.str();
}

int cmd_deduce(const GlobalOpts& g, const std::string& scenario_dir) {
  io::RunConfig cfg = make_config(g);
  Observation obs = split_observation(io::load_scenario(scenario_dir));
  obs.scenario.validate();
  const auto result =
      deduce_lcvs(obs.scenario, cfg.pipeline.idm, cfg.pipeline.deduction);
  fs::create_directories(g.out);
  write_text(g.out + "/deduction.tsv", deduction_report(result));
  std::cout << "deduce: " << result.assignments.size() << " vehicles, "
            << result.lcv_count() << " lane changers -> " << g.out
            << "/deduction.tsv\n";
  return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& scenario_dir, bool resume) {
  io::RunConfig cfg = make_config(g);
  Observation obs = split_observation(io::load_scenario(scenario_dir));
  if (obs.answer_key.trajectories.empty())
    throw InvalidParameterError("training needs a labeled scenario "
                                "(truth_trajectories.tsv)");
  TrainDataset dataset =
      build_dataset(obs, cfg.pipeline, cfg.train.validation_fraction);
  GanModels models = make_models(dataset, cfg.pipeline, cfg.train.seed);
  const std::string ckpt_dir = g.out + "/checkpoints";
  if (resume && fs::exists(ckpt_dir + "/lc_g.ckpt")) load_models(models, ckpt_dir);
  TrainReport report = train(models, dataset, cfg.train);
  save_models(models, ckpt_dir);
  write_text(ckpt_dir + "/train_report.txt", serialize_train_report(report));
  std::cout << "train: " << report.completed_epochs() << " epochs, best epoch "
            << report.best_epoch << ", validation block error "
            << report.best_val_be << " -> " << ckpt_dir << " ("
            << static_cast<int>(report.wall_time_s) << " s)\n";
  return 0;
}

int cmd_reconstruct(const GlobalOpts& g, const std::string& scenario_dir,
                    const std::string& ckpt_dir) {
  io::RunConfig cfg = make_config(g);
  Observation obs = split_observation(io::load_scenario(scenario_dir));
  obs.scenario.validate();
  TrainDataset shape;  // model geometry from the scenario itself
  {
    Observation probe = obs;
    if (probe.answer_key.trajectories.empty()) {
      // Shapes only need lanes, grid and the sequence convention.
      probe.answer_key.trajectories = probe.scenario.cv_trajectories;
    }
    shape = build_dataset(probe, cfg.pipeline, cfg.train.validation_fraction);
  }
  GanModels models = make_models(shape, cfg.pipeline, cfg.train.seed);
  load_models(models, ckpt_dir);
  const auto deduction =
      deduce_lcvs(obs.scenario, cfg.pipeline.idm, cfg.pipeline.deduction);
  const auto scene =
      reconstruct_scene(obs.scenario, deduction, models, cfg.pipeline, g.seed);
  fs::create_directories(g.out);
  io::save_trajectory_table(g.out + "/reconstructed.tsv", scene.trajectories);
  io::save_lc_events(g.out + "/reconstructed_lc_events.tsv", scene.lc_events);
  std::cout << "reconstruct: " << scene.trajectories.size() << " vehicles, "
            << scene.lc_events.size() << " lane changes -> " << g.out
            << "/reconstructed.tsv\n";
  return 0;
}

// Pairs reconstructed with truth vehicles by entry lane and entry time.
std::map<std::string, std::string> pair_vehicles(
    const std::vector<Trajectory>& rec, const GroundTruth& truth, double tol) {
  std::map<std::string, std::string> rec_to_truth;
  std::vector<bool> used(truth.trajectories.size(), false);
  for (const auto& r : rec) {
    int best = -1;
    double best_dt = tol;
    for (std::size_t i = 0; i < truth.trajectories.size(); ++i) {
      if (used[i]) continue;
      const auto& t = truth.trajectories[i];
      if (t.front().lane != r.front().lane) continue;
      const double d = std::abs(t.front().t - r.front().t);
      if (d <= best_dt) {
        best_dt = d;
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) {
      used[best] = true;
      rec_to_truth[r.vehicle_id()] = truth.trajectories[best].vehicle_id();
    }
  }
  return rec_to_truth;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& scenario_dir,
                 const std::string& rec_path, const std::string& lc_path) {
  io::RunConfig cfg = make_config(g);
  ScenarioBundle bundle = io::load_scenario(scenario_dir);
  if (!bundle.ground_truth.has_value())
    throw InvalidParameterError("evaluation needs ground truth in the scenario");
  const auto& truth = *bundle.ground_truth;
  auto rec = io::load_trajectory_table(rec_path);
  std::vector<LcEvent> rec_events;
  if (!lc_path.empty() && fs::exists(lc_path)) rec_events = io::load_lc_events(lc_path);

  if (rec.size() != truth.trajectories.size()) {
    std::cerr << "evaluate: vehicle count mismatch (reconstructed " << rec.size()
              << ", ground truth " << truth.trajectories.size() << ")\n";
    return 1;
  }
  const auto pairing = pair_vehicles(rec, truth, 2.0 * cfg.pipeline.idm.dt);
  if (pairing.size() != rec.size()) {
    std::cerr << "evaluate: " << rec.size() - pairing.size()
              << " reconstructed vehicles have no entry-time pairing\n";
    return 1;
  }

  const BlockGrid grid(bundle.segment_length_m(), cfg.pipeline.grid_resolution_m);
  std::map<std::string, const Trajectory*> truth_by_id;
  for (const auto& t : truth.trajectories) truth_by_id[t.vehicle_id()] = &t;
  std::map<std::string, const LcEvent*> truth_lc, rec_lc;
  for (const auto& e : truth.lc_events) truth_lc[e.vehicle_id] = &e;
  for (const auto& e : rec_events) rec_lc[e.vehicle_id] = &e;

  std::vector<VehicleMetrics> rows;
  for (const auto& r : rec) {
    const auto& truth_id = pairing.at(r.vehicle_id());
    const Trajectory& real = *truth_by_id.at(truth_id);
    VehicleMetrics m;
    m.vehicle_id = truth_id;
    m.qe = compute_qe(real, r, cfg.pipeline.idm);
    m.pe = compute_pe(real, r, cfg.pipeline.idm);
    m.te = compute_te(real, r, grid);
    const auto it_truth = truth_lc.find(truth_id);
    if (it_truth != truth_lc.end()) {
      m.is_lcv = true;
      m.lc_type = it_truth->second->lc_type;
      m.real_block = it_truth->second->lc_block;
      const auto it_rec = rec_lc.find(r.vehicle_id());
      if (it_rec != rec_lc.end()) m.est_block = it_rec->second->lc_block;
    }
    rows.push_back(std::move(m));
  }

  // Baseline comparison rows from the physics conditions of each labeled
  // lane changer.
  std::map<std::string, BeRow> baselines;
  try {
    Observation labeled = split_observation(io::load_scenario(scenario_dir));
    TrainDataset ds =
        build_dataset(labeled, cfg.pipeline, cfg.train.validation_fraction);
    std::vector<double> rule_all, rule_mlc, rule_dlc;
    std::vector<double> util_all, util_mlc, util_dlc;
    auto add = [&](LcTrainSample& s) {
      const auto rule = baseline_rule_lcp(s.cond.safety, s.cond.signal_origin,
                                          s.cond.signal_target);
      UtilityBaselineInputs in;
      in.origin_hyp = &s.origin_hyp;
      in.target_hyp = &s.target_hyp;
      in.grid = &ds.grid;
      in.idm = cfg.pipeline.idm;
      in.safety = s.cond.safety;
      in.signal_origin = s.cond.signal_origin;
      in.signal_target = s.cond.signal_target;
      const auto util = baseline_utility_lcp(in);
      if (rule.has_value()) {
        const double err = std::abs(*rule - s.true_block);
        rule_all.push_back(err);
        (s.lc_type == LcType::kMandatory ? rule_mlc : rule_dlc).push_back(err);
      }
      if (util.has_value()) {
        const double err = std::abs(*util - s.true_block);
        util_all.push_back(err);
        (s.lc_type == LcType::kMandatory ? util_mlc : util_dlc).push_back(err);
      }
    };
    for (auto& s : ds.lc_train) add(s);
    for (auto& s : ds.lc_val) add(s);
    if (!rule_all.empty())
      baselines["rule"] = {aggregate(rule_all), aggregate(rule_mlc),
                           aggregate(rule_dlc)};
    if (!util_all.empty())
      baselines["utility"] = {aggregate(util_all), aggregate(util_mlc),
                              aggregate(util_dlc)};
  } catch (const Error&) {
    // Baselines are best-effort; the vehicle metrics stand alone.
  }

  const auto report = build_report(std::move(rows), baselines);
  fs::create_directories(g.out);
  write_text(g.out + "/evaluation.txt", serialize_report(report));
  write_text(g.out + "/evaluation.csv", report_to_csv(report));
  std::cout << "evaluate: " << report.per_vehicle.size() << " vehicles, be_all "
            << report.be.all.mean << " (n=" << report.be.all.count << "), pe "
            << report.pe.mean << " -> " << g.out << "/evaluation.txt\n";
  return 0;
}

int cmd_plot(const GlobalOpts& g, const std::string& scenario_dir,
             const std::string& rec_path, const std::string& lc_path) {
  ScenarioBundle bundle = io::load_scenario(scenario_dir);
  auto rec = io::load_trajectory_table(rec_path);
  std::vector<LcEvent> rec_events;
  if (!lc_path.empty() && fs::exists(lc_path)) rec_events = io::load_lc_events(lc_path);
  std::vector<Trajectory> overlay;
  if (bundle.ground_truth.has_value()) overlay = bundle.ground_truth->trajectories;
  fs::create_directories(g.out);
  io::save_timespace_svg(g.out + "/diagram.svg", bundle.lanes, rec, overlay,
                         rec_events, bundle.signal);
  std::cout << "plot: " << rec.size() << " vehicles -> " << g.out
            << "/diagram.svg\n";
  return 0;
}

int cmd_pipeline(const GlobalOpts& g) {
  int rc = cmd_synth(g);
  if (rc != 0) return rc;
  const std::string scenario_dir = g.out + "/scenario";
  rc = cmd_deduce(g, scenario_dir);
  if (rc != 0) return rc;
  rc = cmd_train(g, scenario_dir, /*resume=*/false);
  if (rc != 0) return rc;
  rc = cmd_reconstruct(g, scenario_dir, g.out + "/checkpoints");
  if (rc != 0) return rc;
  rc = cmd_evaluate(g, scenario_dir, g.out + "/reconstructed.tsv",
                    g.out + "/reconstructed_lc_events.tsv");
  if (rc != 0) return rc;
  return cmd_plot(g, scenario_dir, g.out + "/reconstructed.tsv",
                  g.out + "/reconstructed_lc_events.tsv");
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"arterial trajectory reconstruction from sparse probe data"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOpts g;
  app.add_option("--seed", g.seed, "seed for every stochastic stage");
  app.add_option("--config", g.config_path, "JSON configuration file");
  app.add_option("--out", g.out, "output directory")->required();

  std::string scenario_dir, ckpt_dir, rec_path, lc_path;
  bool resume = false;

  auto* synth = app.add_subcommand("synth", "generate a labeled scenario");
  auto* deduce = app.add_subcommand("deduce", "match detector events");
  deduce->add_option("--scenario", scenario_dir, "scenario directory")->required();
  auto* train_cmd = app.add_subcommand("train", "train the generative models");
  train_cmd->add_option("--scenario", scenario_dir, "labeled scenario directory")
      ->required();
  train_cmd->add_flag("--resume", resume, "continue from existing checkpoints");
  auto* rec_cmd = app.add_subcommand("reconstruct", "reconstruct all vehicles");
  rec_cmd->add_option("--scenario", scenario_dir, "scenario directory")->required();
  rec_cmd->add_option("--checkpoints", ckpt_dir, "checkpoint directory")->required();
  auto* eval_cmd = app.add_subcommand("evaluate", "score against ground truth");
  eval_cmd->add_option("--scenario", scenario_dir, "labeled scenario directory")
      ->required();
  eval_cmd->add_option("--reconstructed", rec_path, "reconstructed table")->required();
  eval_cmd->add_option("--lc-events", lc_path, "reconstructed lane-change table");
  auto* plot_cmd = app.add_subcommand("plot", "render the time-space diagram");
  plot_cmd->add_option("--scenario", scenario_dir, "scenario directory")->required();
  plot_cmd->add_option("--reconstructed", rec_path, "reconstructed table")->required();
  plot_cmd->add_option("--lc-events", lc_path, "reconstructed lane-change table");
  auto* pipe_cmd = app.add_subcommand("pipeline", "run every stage in order");
  (void)pipe_cmd;

  std::vector<const char*> argv;
  argv.push_back("artrec");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (app.got_subcommand("synth")) return cmd_synth(g);
    if (app.got_subcommand("deduce")) return cmd_deduce(g, scenario_dir);
    if (app.got_subcommand("train")) return cmd_train(g, scenario_dir, resume);
    if (app.got_subcommand("reconstruct"))
      return cmd_reconstruct(g, scenario_dir, ckpt_dir);
    if (app.got_subcommand("evaluate"))
      return cmd_evaluate(g, scenario_dir, rec_path, lc_path);
    if (app.got_subcommand("plot")) return cmd_plot(g, scenario_dir, rec_path, lc_path);
    if (app.got_subcommand("pipeline")) return cmd_pipeline(g);
  } catch (const InvalidParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const OutOfRangeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace artrec::cli
