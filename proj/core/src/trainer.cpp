#include "artrec/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "artrec/nn/checkpoint.hpp"

namespace artrec {

namespace {

double grad_neg_log(double s, double batch) {
  return s > nn::kLogEps ? -1.0 / (batch * s) : 0.0;
}

double grad_neg_log1m(double s, double batch) {
  return (1.0 - s) > nn::kLogEps ? 1.0 / (batch * (1.0 - s)) : 0.0;
}

// Seeded derangement (no index maps to itself); identity for n < 2.
std::vector<std::size_t> derangement(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  if (n < 2) return perm;
  for (int attempt = 0; attempt < 64; ++attempt) {
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j =
          static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)));
      std::swap(perm[i], perm[j]);
    }
    bool fixed_point = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (perm[i] == i) {
        fixed_point = true;
        break;
      }
    }
    if (!fixed_point) return perm;
  }
  // Rotation fallback is always a derangement for n >= 2.
  for (std::size_t i = 0; i < n; ++i) perm[i] = (i + 1) % n;
  return perm;
}

std::vector<double> draw_noise(std::size_t n, Rng& rng) {
  std::vector<double> z(n);
  for (auto& v : z) v = rng.normal();
  return z;
}

// Restriction of a trajectory to its samples in one lane; nullopt when
// the vehicle never occupies it.
std::optional<Trajectory> lane_restricted(const Trajectory& traj, LaneId lane) {
  std::vector<TrajectorySample> samples;
  for (const auto& s : traj.samples()) {
    if (s.lane == lane) samples.push_back(s);
  }
  if (samples.size() < 2) return std::nullopt;
  return Trajectory(traj.vehicle_id(), traj.kind(), std::move(samples));
}

double masked_pe(const TrajSequence& rm, const TrajSequence& gm) {
  double acc = 0.0;
  int n = 0;
  const int limit = std::min(rm.steps() - 1, rm.exit_step);
  for (int k = 0; k <= limit; ++k) {
    const double d = (rm.values[k] - gm.values[k]) * rm.segment_length;
    acc += d * d;
    ++n;
  }
  return n > 0 ? std::sqrt(acc / n) : 0.0;
}

std::string hex_double_str(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0 || batch_size < 0 || lr_g < 0.0 || lr_d < 0.0 ||
      omega_lc < 0.0 || omega_traj < 0.0 || clip_norm <= 0.0 || patience <= 0 ||
      validation_fraction <= 0.0 || validation_fraction >= 1.0)
    throw InvalidParameterError("invalid training configuration");
}

std::string serialize_train_report(const TrainReport& report) {
  std::ostringstream os;
  os << "artrec-train-report v1\n";
  os << "mode " << (report.mode == TrainMode::kJoint ? "joint" : "sequential")
     << '\n';
  os << "epochs " << report.epochs.size() << '\n';
  os << "best_epoch " << report.best_epoch << '\n';
  os << "best_val_be " << hex_double_str(report.best_val_be) << '\n';
  os << "best_val_pe " << hex_double_str(report.best_val_pe) << '\n';
  os << "columns epoch loss_lc_d loss_lc_g loss_traj_d loss_traj_g val_be "
        "val_pe grad_d grad_g\n";
  char line[256];
  for (std::size_t e = 0; e < report.epochs.size(); ++e) {
    const auto& s = report.epochs[e];
    std::snprintf(line, sizeof(line),
                  "%zu %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f\n", e, s.loss_lc_d,
                  s.loss_lc_g, s.loss_traj_d, s.loss_traj_g, s.val_be, s.val_pe,
                  s.max_grad_norm_d, s.max_grad_norm_g);
    os << line;
  }
  return os.str();
}

TrainDataset build_dataset(const Observation& obs, const PipelineParams& params,
                           double validation_fraction) {
  const auto& scenario = obs.scenario;
  const auto& truth = obs.answer_key;
  if (truth.trajectories.empty())
    throw InvalidParameterError("dataset build needs labeled trajectories");

  TrainDataset ds;
  ds.lanes = scenario.lanes;
  const double length = scenario.segment_length_m();
  ds.grid = BlockGrid(length, params.grid_resolution_m);
  ds.vocab = LanePairVocab(scenario.lanes,
                           params.deduction.allow_non_adjacent_pairs);
  ds.dt = params.idm.dt;
  ds.segment_length = length;
  const double cycle = scenario.signal.cycle_length_s();
  ds.seq_steps =
      static_cast<int>(std::ceil(params.window_factor * cycle / ds.dt));

  // Per-lane desired speeds anchored to the observed probes.
  std::map<LaneId, IdmParams> lane_params;
  for (const auto& lane : scenario.lanes) {
    IdmParams p = params.idm;
    p.desired_speed = lane_desired_speed(scenario, lane.id, params.idm);
    lane_params[lane.id] = p;
  }

  // Lane-restricted ground-truth segments, reused for leaders, queue
  // profiles and target-lane safety gaps.
  std::map<LaneId, std::vector<std::pair<std::string, Trajectory>>> segments;
  for (const auto& lane : scenario.lanes) {
    for (const auto& traj : truth.trajectories) {
      auto restricted = lane_restricted(traj, lane.id);
      if (restricted.has_value())
        segments[lane.id].emplace_back(traj.vehicle_id(), std::move(*restricted));
    }
  }

  auto leader_at_entry = [&](LaneId lane, double t0, const std::string& self)
      -> const Trajectory* {
    const Trajectory* best = nullptr;
    double best_x = std::numeric_limits<double>::infinity();
    for (const auto& [id, seg] : segments[lane]) {
      if (id == self) continue;
      const auto s = seg.at_time(t0);
      if (!s.has_value()) continue;
      if (s->x >= 0.0 && s->x < best_x) {
        best_x = s->x;
        best = &seg;
      }
    }
    return best;
  };

  auto lane_profile_excluding = [&](LaneId lane, const std::string& self,
                                    double t0, double t1) {
    std::vector<const Trajectory*> trajs;
    for (const auto& [id, seg] : segments[lane]) {
      if (id != self) trajs.push_back(&seg);
    }
    const int steps =
        std::max(2, static_cast<int>(std::ceil((t1 - t0) / params.idm.dt)) + 2);
    return queue_profile(trajs, ds.grid, t0, steps, params.idm);
  };

  auto target_lane_trajs = [&](LaneId lane, const std::string& self) {
    std::vector<const Trajectory*> out;
    for (const auto& [id, seg] : segments[lane]) {
      if (id != self) out.push_back(&seg);
    }
    return out;
  };

  std::map<std::string, const LcEvent*> lc_by_vehicle;
  for (const auto& e : truth.lc_events) lc_by_vehicle[e.vehicle_id] = &e;

  double last_entry = 0.0;
  for (const auto& traj : truth.trajectories)
    last_entry = std::max(last_entry, traj.front().t);
  const int n_cycles = static_cast<int>(std::floor(last_entry / cycle)) + 1;
  const int val_cycles = std::max(
      1, static_cast<int>(std::lround(validation_fraction * n_cycles)));
  const double val_start = (n_cycles - val_cycles) * cycle;

  for (const auto& traj : truth.trajectories) {
    const double t0 = traj.front().t;
    const bool is_val = t0 >= val_start;
    const LaneId entry_lane = traj.front().lane;
    const auto it = lc_by_vehicle.find(traj.vehicle_id());

    const Trajectory* leader_o =
        leader_at_entry(entry_lane, t0, traj.vehicle_id());
    Trajectory hyp_o = generate_hypothetical_trajectory(
        t0, scenario.lane(entry_lane), leader_o, scenario.signal,
        lane_params[entry_lane], traj.vehicle_id() + "_hyp",
        LeaderEnd::kDeparts);

    TrajSequence rm_traj =
        resample_to_sequence(traj, t0, ds.dt, ds.seq_steps, length);

    if (it == lc_by_vehicle.end()) {
      NonLcTrainSample s;
      s.vehicle_id = traj.vehicle_id();
      s.c_traj = resample_to_sequence(hyp_o, t0, ds.dt, ds.seq_steps, length);
      s.rm_traj = std::move(rm_traj);
      (is_val ? ds.nolc_val : ds.nolc_train).push_back(std::move(s));
      continue;
    }

    const LcEvent& event = *it->second;
    const Trajectory* leader_t =
        leader_at_entry(event.target_lane, t0, traj.vehicle_id());
    Trajectory hyp_t = generate_hypothetical_trajectory(
        t0, scenario.lane(event.target_lane), leader_t, scenario.signal,
        lane_params[event.target_lane], traj.vehicle_id() + "_hyp_t",
        LeaderEnd::kDeparts);

    LcTrainSample s;
    s.vehicle_id = traj.vehicle_id();
    s.origin_lane = event.origin_lane;
    s.target_lane = event.target_lane;
    s.lc_type = event.lc_type;
    s.true_block = event.lc_block;
    s.rm_lc = encode_lcp(ds.grid, event.lc_block);
    s.rm_traj = std::move(rm_traj);

    const auto profile_o =
        lane_profile_excluding(event.origin_lane, traj.vehicle_id(),
                               hyp_o.front().t, hyp_o.back().t);
    const auto profile_t =
        lane_profile_excluding(event.target_lane, traj.vehicle_id(),
                               hyp_o.front().t, hyp_o.back().t);
    s.cond.safety = safety_condition(
        hyp_o, target_lane_trajs(event.target_lane, traj.vehicle_id()), ds.grid,
        params.safety, params.idm);
    s.cond.signal_origin = signal_condition(profile_o, hyp_o, ds.grid);
    s.cond.signal_target = signal_condition(profile_t, hyp_o, ds.grid);
    s.cond.geo_onehot = ds.vocab.one_hot(event.origin_lane, event.target_lane);

    s.splices.candidates.reserve(ds.grid.block_count());
    for (int b = 1; b <= ds.grid.block_count(); ++b) {
      try {
        const auto spliced = assemble_initial_lc_trajectory(
            hyp_o, hyp_t, b, ds.grid, traj.vehicle_id());
        s.splices.candidates.push_back(resample_to_sequence(
            spliced.trajectory, t0, ds.dt, ds.seq_steps, length));
      } catch (const SpliceInfeasibleError&) {
        s.splices.candidates.push_back(
            resample_to_sequence(hyp_o, t0, ds.dt, ds.seq_steps, length));
      }
    }
    s.origin_hyp = std::move(hyp_o);
    s.target_hyp = std::move(hyp_t);
    (is_val ? ds.lc_val : ds.lc_train).push_back(std::move(s));
  }
  return ds;
}

GanModels make_models(const TrainDataset& dataset, const PipelineParams& params,
                      std::uint64_t seed) {
  GanModels m;
  m.lc_cfg.blocks = dataset.grid.block_count();
  m.lc_cfg.pair_vocab = dataset.vocab.size();
  m.lc_cfg.conv_channels = params.lc_channels;
  m.lc_cfg.kernel = params.lc_kernel;
  m.lc_cfg.seed = Rng(seed).fork(0x1C).seed();
  m.traj_cfg.steps = dataset.seq_steps;
  m.traj_cfg.dt = dataset.dt;
  m.traj_cfg.segment_length = dataset.segment_length;
  m.traj_cfg.max_step_fraction = params.max_step_headroom *
                                 params.idm.desired_speed * dataset.dt /
                                 dataset.segment_length;
  m.traj_cfg.hidden = params.traj_hidden;
  m.traj_cfg.conv_channels = params.traj_conv_channels;
  m.traj_cfg.seed = Rng(seed).fork(0x7A).seed();
  m.lc_g = LcGenerator(m.lc_cfg);
  m.lc_d = LcDiscriminator(m.lc_cfg);
  m.traj_g = TrajGenerator(m.traj_cfg);
  m.traj_d = TrajDiscriminator(m.traj_cfg);
  return m;
}

namespace {

void save_array(const nn::NumArray& a, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << "artrec-tensor v1\n";
  os << "shape " << a.shape().size();
  for (int d : a.shape()) os << ' ' << d;
  os << '\n';
  for (std::size_t i = 0; i < a.size(); ++i)
    os << hex_double_str(a[i])
       << (((i + 1) % 8 == 0 || i + 1 == a.size()) ? '\n' : ' ');
}

nn::NumArray load_array(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::string header;
  std::getline(is, header);
  if (header != "artrec-tensor v1") throw SchemaError("bad tensor header");
  std::string kw;
  std::size_t ndims = 0;
  is >> kw >> ndims;
  if (kw != "shape") throw SchemaError("bad tensor shape line");
  std::vector<int> shape(ndims);
  for (auto& d : shape) is >> d;
  nn::NumArray a(shape);
  std::string token;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(is >> token)) throw SchemaError("truncated tensor file");
    a[i] = std::strtod(token.c_str(), nullptr);
  }
  return a;
}

}  // namespace

void save_models(const GanModels& models, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nn::save_network(models.lc_g.network(), dir + "/lc_g.ckpt");
  save_array(models.lc_g.geo_embedding(), dir + "/lc_g_geo.ckpt");
  nn::save_network(models.lc_d.network(), dir + "/lc_d.ckpt");
  nn::save_network(models.traj_g.network(), dir + "/traj_g.ckpt");
  nn::save_network(models.traj_d.network(), dir + "/traj_d.ckpt");
}

void load_models(GanModels& models, const std::string& dir) {
  models.lc_g.network() = nn::load_network(dir + "/lc_g.ckpt");
  models.lc_g.geo_embedding() = load_array(dir + "/lc_g_geo.ckpt");
  models.lc_d.network() = nn::load_network(dir + "/lc_d.ckpt");
  models.traj_g.network() = nn::load_network(dir + "/traj_g.ckpt");
  models.traj_d.network() = nn::load_network(dir + "/traj_d.ckpt");
}

std::vector<double> lc_distribution_eval(LcGenerator& gen, const LcInput& cond,
                                         Rng& rng, int draws) {
  const int s = gen.config().blocks;
  std::vector<double> mean(s, 0.0);
  for (int d = 0; d < draws; ++d) {
    const auto z = draw_noise(s, rng);
    const auto dist = gen.forward(z, cond, /*training=*/false, nullptr);
    for (int i = 0; i < s; ++i) mean[i] += dist[i] / draws;
  }
  return mean;
}

TrajSequence refine_eval(TrajGenerator& gen, const TrajSequence& condition,
                         Rng& rng, int draws) {
  const int t_steps = gen.config().steps;
  TrajSequence mean = condition;
  std::fill(mean.values.begin(), mean.values.end(), 0.0);
  for (int d = 0; d < draws; ++d) {
    const auto z = draw_noise(t_steps, rng);
    const auto seq = gen.forward(z, condition, /*training=*/false, nullptr);
    for (int k = 0; k < t_steps; ++k) mean.values[k] += seq.values[k] / draws;
  }
  mean.exit_step = TrajSequence::compute_exit(mean.values);
  return mean;
}

namespace {

// Index into the merged trajectory-sample stream: lane-change samples
// first, then car-following-only samples.
struct BatchItem {
  bool is_lc = false;
  std::size_t index = 0;
};

std::vector<std::vector<BatchItem>> make_batches(std::size_t n_lc,
                                                 std::size_t n_nolc,
                                                 int batch_size, Rng& rng) {
  std::vector<BatchItem> items;
  items.reserve(n_lc + n_nolc);
  for (std::size_t i = 0; i < n_lc; ++i) items.push_back({true, i});
  for (std::size_t i = 0; i < n_nolc; ++i) items.push_back({false, i});
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i - 1)));
    std::swap(items[i - 1], items[j]);
  }
  const std::size_t total = items.size();
  const std::size_t b = batch_size > 0
                            ? static_cast<std::size_t>(batch_size)
                            : (total <= 64 ? std::max<std::size_t>(total, 1) : 32);
  std::vector<std::vector<BatchItem>> batches;
  for (std::size_t at = 0; at < total; at += b) {
    batches.emplace_back(items.begin() + at,
                         items.begin() + std::min(at + b, total));
  }
  return batches;
}

struct GStepGrads {
  nn::NetworkGrads lc_g;
  nn::NumArray geo;
  nn::NetworkGrads traj_g;
};

struct DStepGrads {
  nn::NetworkGrads lc_d;
  nn::NetworkGrads traj_d;
};

std::vector<nn::NumArray*> flatten_d(DStepGrads& g) {
  auto out = nn::Network::grad_tensors(g.lc_d);
  auto t = nn::Network::grad_tensors(g.traj_d);
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

std::vector<nn::NumArray*> flatten_g(GStepGrads& g) {
  auto out = nn::Network::grad_tensors(g.lc_g);
  out.push_back(&g.geo);
  auto t = nn::Network::grad_tensors(g.traj_g);
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

std::vector<nn::NumArray*> d_params(GanModels& m) {
  auto out = m.lc_d.network().parameter_tensors();
  auto t = m.traj_d.network().parameter_tensors();
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

std::vector<nn::NumArray*> g_params(GanModels& m) {
  auto out = m.lc_g.network().parameter_tensors();
  out.push_back(&m.lc_g.geo_embedding());
  auto t = m.traj_g.network().parameter_tensors();
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

std::vector<const nn::NumArray*> const_view(const std::vector<nn::NumArray*>& v) {
  return {v.begin(), v.end()};
}

// Per-item forward context shared by the discriminator and generator
// steps of one batch.
struct ItemContext {
  const LcTrainSample* lc = nullptr;
  const NonLcTrainSample* nolc = nullptr;
  std::vector<double> z_lc, z_traj;
  std::vector<double> gm_lc;          // generated distribution
  std::vector<double> c_lc;           // embedded condition sequence
  TrajSequence c_traj;                // mixture (lc) or hypothetical (nolc)
  const TrajSequence* rm_traj = nullptr;
};


}  // namespace

EpochStats train_epoch_joint(GanModels& models, TrainDataset& dataset,
                             const TrainConfig& cfg, nn::AdamState& adam_d,
                             nn::AdamState& adam_g, int epoch) {
  EpochStats stats;
  Rng shuffle_rng = Rng(cfg.seed).fork(0xBA7C00 + epoch);
  Rng noise_rng = Rng(cfg.seed).fork(0x4015E00 + epoch);
  const auto batches = make_batches(dataset.lc_train.size(),
                                    dataset.nolc_train.size(), cfg.batch_size,
                                    shuffle_rng);
  const int s_blocks = models.lc_cfg.blocks;
  const int t_steps = models.traj_cfg.steps;
  int n_batches = 0;

  for (const auto& batch : batches) {
    if (batch.empty()) continue;
    ++n_batches;

    // Assemble per-item forwards used by both alternation steps.
    std::vector<ItemContext> items(batch.size());
    std::size_t b_lc = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto& it = items[i];
      if (batch[i].is_lc) {
        it.lc = &dataset.lc_train[batch[i].index];
        it.z_lc = draw_noise(s_blocks, noise_rng);
        it.rm_traj = &it.lc->rm_traj;
        ++b_lc;
      } else {
        it.nolc = &dataset.nolc_train[batch[i].index];
        it.rm_traj = &it.nolc->rm_traj;
      }
      it.z_traj = draw_noise(t_steps, noise_rng);
    }
    const double bsz_lc = static_cast<double>(std::max<std::size_t>(b_lc, 1));
    const double bsz_traj = static_cast<double>(batch.size());

    // Mismatched-condition partners within the batch.
    const auto perm = derangement(batch.size(), noise_rng);
    std::vector<std::size_t> lc_indices;
    for (std::size_t i = 0; i < batch.size(); ++i)
      if (items[i].lc != nullptr) lc_indices.push_back(i);
    const auto lc_perm = derangement(lc_indices.size(), noise_rng);

    // ---- Step 1: update both discriminators, generators fixed. ----
    {
      DStepGrads grads{models.lc_d.network().zero_grads(),
                       models.traj_d.network().zero_grads()};
      std::vector<double> sf_lc, sm_lc, sr_lc, sf_tj, sm_tj, sr_tj;
      std::vector<std::vector<double>> rm_lc_batch, gm_lc_batch;
      std::vector<TrajSequence> rm_tj_batch, gm_tj_batch;

      // Forward chain per item (fresh noise, no generator caches).
      for (auto& it : items) {
        if (it.lc != nullptr) {
          it.gm_lc =
              models.lc_g.forward(it.z_lc, it.lc->cond, /*training=*/true, nullptr);
          it.c_lc = models.lc_g.conditions(it.lc->cond);
          it.c_traj = it.lc->splices.mix(it.gm_lc);
        } else {
          it.c_traj = it.nolc->c_traj;
        }
      }

      for (std::size_t li = 0; li < lc_indices.size(); ++li) {
        auto& it = items[lc_indices[li]];
        const auto& partner = items[lc_indices[lc_perm[li]]];
        LcDiscCache cf, cm, cr;
        const double s_fake =
            models.lc_d.forward(it.gm_lc, it.c_lc, true, &cf);
        const double s_real =
            models.lc_d.forward(it.lc->rm_lc, it.c_lc, true, &cr);
        sf_lc.push_back(s_fake);
        sr_lc.push_back(s_real);
        rm_lc_batch.push_back(it.lc->rm_lc);
        gm_lc_batch.push_back(it.gm_lc);
        models.lc_d.backward(cf, grad_neg_log1m(s_fake, bsz_lc), &grads.lc_d,
                             nullptr, nullptr);
        models.lc_d.backward(cr, grad_neg_log(s_real, bsz_lc), &grads.lc_d,
                             nullptr, nullptr);
        if (lc_indices.size() > 1) {
          const double s_mis =
              models.lc_d.forward(it.lc->rm_lc, partner.c_lc, true, &cm);
          sm_lc.push_back(s_mis);
          models.lc_d.backward(cm, grad_neg_log1m(s_mis, bsz_lc), &grads.lc_d,
                               nullptr, nullptr);
        } else {
          sm_lc.push_back(0.0);
        }
      }

      for (std::size_t i = 0; i < items.size(); ++i) {
        auto& it = items[i];
        const auto& partner = items[perm[i]];
        const TrajSequence gm_traj = models.traj_g.forward(
            it.z_traj, it.c_traj, /*training=*/true, nullptr);
        TrajDiscCache cf, cm, cr;
        const double s_fake = models.traj_d.forward(gm_traj, it.c_traj, true, &cf);
        const double s_real =
            models.traj_d.forward(*it.rm_traj, it.c_traj, true, &cr);
        sf_tj.push_back(s_fake);
        sr_tj.push_back(s_real);
        rm_tj_batch.push_back(*it.rm_traj);
        gm_tj_batch.push_back(gm_traj);
        models.traj_d.backward(cf, grad_neg_log1m(s_fake, bsz_traj),
                               &grads.traj_d, nullptr, nullptr);
        models.traj_d.backward(cr, grad_neg_log(s_real, bsz_traj), &grads.traj_d,
                               nullptr, nullptr);
        if (items.size() > 1) {
          const double s_mis =
              models.traj_d.forward(*it.rm_traj, partner.c_traj, true, &cm);
          sm_tj.push_back(s_mis);
          models.traj_d.backward(cm, grad_neg_log1m(s_mis, bsz_traj),
                                 &grads.traj_d, nullptr, nullptr);
        } else {
          sm_tj.push_back(0.0);
        }
      }

      auto flat = flatten_d(grads);
      const double pre = nn::clip_global_norm(flat, cfg.clip_norm);
      stats.max_grad_norm_d =
          std::max(stats.max_grad_norm_d, std::min(pre, cfg.clip_norm));
      auto params = d_params(models);
      adam_d.step(params, flat);

      if (!sf_lc.empty())
        stats.loss_lc_d += loss_lcd(sf_lc, sm_lc, sr_lc, rm_lc_batch,
                                    gm_lc_batch, cfg.omega_lc);
      stats.loss_traj_d += loss_trajd(sf_tj, sm_tj, sr_tj, rm_tj_batch,
                                      gm_tj_batch, cfg.omega_traj);
    }

    // ---- Step 2: update both generators, discriminators fixed. ----
    {
      GStepGrads grads{models.lc_g.network().zero_grads(),
                       nn::NumArray::zeros_like(models.lc_g.geo_embedding()),
                       models.traj_g.network().zero_grads()};
      nn::NetworkGrads scratch_lcd = models.lc_d.network().zero_grads();
      nn::NetworkGrads scratch_tjd = models.traj_d.network().zero_grads();
      std::vector<double> sf_lc, sf_tj;

      for (std::size_t i = 0; i < items.size(); ++i) {
        auto& it = items[i];
        std::vector<double> d_ctraj(t_steps, 0.0);

        // Recompute the forward chain with caches.
        LcGenCache g_cache;
        TrajGenCache t_cache;
        TrajSequence c_traj;
        if (it.lc != nullptr) {
          it.z_lc = draw_noise(s_blocks, noise_rng);
          it.gm_lc = models.lc_g.forward(it.z_lc, it.lc->cond, true, &g_cache);
          it.c_lc = models.lc_g.conditions(it.lc->cond);
          c_traj = it.lc->splices.mix(it.gm_lc);
        } else {
          c_traj = it.nolc->c_traj;
        }
        it.z_traj = draw_noise(t_steps, noise_rng);
        const TrajSequence gm_traj =
            models.traj_g.forward(it.z_traj, c_traj, true, &t_cache);

        // Trajectory adversarial + reconstruction terms.
        TrajDiscCache td_cache;
        const double s_tj =
            models.traj_d.forward(gm_traj, c_traj, true, &td_cache);
        sf_tj.push_back(s_tj);
        std::vector<double> d_gm_traj(t_steps, 0.0), d_ctraj_d(t_steps, 0.0);
        models.traj_d.backward(td_cache, grad_neg_log(s_tj, bsz_traj),
                               &scratch_tjd, &d_gm_traj, &d_ctraj_d);
        const auto& rm = *it.rm_traj;
        const int limit = std::min(rm.steps() - 1,
                                   std::max(rm.exit_step, gm_traj.exit_step));
        for (int k = 0; k <= limit; ++k) {
          d_gm_traj[k] += cfg.omega_traj * 2.0 *
                          (gm_traj.values[k] - rm.values[k]) / bsz_traj;
        }
        std::vector<double> d_ctraj_g(t_steps, 0.0);
        models.traj_g.backward(t_cache, d_gm_traj, &grads.traj_g, &d_ctraj_g);
        for (int k = 0; k < t_steps; ++k)
          d_ctraj[k] = d_ctraj_d[k] + d_ctraj_g[k];

        if (it.lc != nullptr) {
          // Lane-change adversarial term.
          LcDiscCache ld_cache;
          const double s_lc =
              models.lc_d.forward(it.gm_lc, it.c_lc, true, &ld_cache);
          sf_lc.push_back(s_lc);
          std::vector<double> d_gm_lc(s_blocks, 0.0), d_clc(4 * s_blocks, 0.0);
          models.lc_d.backward(ld_cache, grad_neg_log(s_lc, bsz_lc),
                               &scratch_lcd, &d_gm_lc, &d_clc);
          // Reconstruction pull toward the labeled block.
          for (int k = 0; k < s_blocks; ++k)
            d_gm_lc[k] += cfg.omega_lc * 2.0 *
                          (it.gm_lc[k] - it.lc->rm_lc[k]) / bsz_lc;
          // Trajectory loss reaches the block distribution through the
          // probability-weighted splice.
          const auto d_mix = it.lc->splices.grad_distribution(d_ctraj);
          for (int k = 0; k < s_blocks; ++k) d_gm_lc[k] += d_mix[k];

          models.lc_g.backward(g_cache, d_gm_lc, &grads.lc_g, &grads.geo);
          // Condition path into the embedding via the discriminator input.
          const std::vector<double> d_geo_seq(d_clc.begin() + 3 * s_blocks,
                                              d_clc.end());
          LcGenerator::accumulate_embedding_grad(it.lc->cond.geo_onehot,
                                                 d_geo_seq, &grads.geo);
        }
      }

      auto flat = flatten_g(grads);
      const double pre = nn::clip_global_norm(flat, cfg.clip_norm);
      stats.max_grad_norm_g =
          std::max(stats.max_grad_norm_g, std::min(pre, cfg.clip_norm));
      auto params = g_params(models);
      adam_g.step(params, flat);

      if (!sf_lc.empty()) stats.loss_lc_g += loss_lcg(sf_lc);
      stats.loss_traj_g += loss_trajg(sf_tj);
    }
  }

  if (n_batches > 0) {
    stats.loss_lc_d /= n_batches;
    stats.loss_lc_g /= n_batches;
    stats.loss_traj_d /= n_batches;
    stats.loss_traj_g /= n_batches;
  }
  if (!std::isfinite(stats.loss_lc_d) || !std::isfinite(stats.loss_lc_g) ||
      !std::isfinite(stats.loss_traj_d) || !std::isfinite(stats.loss_traj_g)) {
    throw TrainingDivergenceError("non-finite loss at epoch " +
                                  std::to_string(epoch));
  }
  return stats;
}

namespace {

// Validation block error / position error under inference conditions.
void validate_epoch(GanModels& models, TrainDataset& dataset,
                    const TrainConfig& cfg, int epoch, EpochStats* stats) {
  Rng rng = Rng(cfg.seed).fork(0x7A11DA7E + epoch);
  const int draws = 8;
  double be = 0.0;
  std::size_t n_be = 0;
  std::vector<double> pes;
  for (auto& s : dataset.lc_val) {
    const auto dist = lc_distribution_eval(models.lc_g, s.cond, rng, draws);
    const int block = select_lcp(dist);
    be += std::abs(block - s.true_block);
    ++n_be;
    const auto& cand = s.splices.candidates[block - 1];
    const auto refined = refine_eval(models.traj_g, cand, rng, draws);
    pes.push_back(masked_pe(s.rm_traj, refined));
  }
  for (auto& s : dataset.nolc_val) {
    const auto refined = refine_eval(models.traj_g, s.c_traj, rng, draws);
    pes.push_back(masked_pe(s.rm_traj, refined));
  }
  stats->val_be = n_be > 0 ? be / n_be : 0.0;
  if (!pes.empty()) {
    double acc = 0.0;
    for (double p : pes) acc += p;
    stats->val_pe = acc / pes.size();
  }
}

struct Snapshot {
  nn::Network lc_g, lc_d, traj_g, traj_d;
  nn::NumArray geo;
};

Snapshot take_snapshot(const GanModels& m) {
  return {m.lc_g.network(), m.lc_d.network(), m.traj_g.network(),
          m.traj_d.network(), m.lc_g.geo_embedding()};
}

void restore_snapshot(GanModels& m, const Snapshot& s) {
  m.lc_g.network() = s.lc_g;
  m.lc_d.network() = s.lc_d;
  m.traj_g.network() = s.traj_g;
  m.traj_d.network() = s.traj_d;
  m.lc_g.geo_embedding() = s.geo;
}

}  // namespace

TrainReport train(GanModels& models, TrainDataset& dataset,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.mode == TrainMode::kSequential)
    return train_sequential(models, dataset, cfg);

  const auto t_start = std::chrono::steady_clock::now();
  TrainReport report;
  report.mode = TrainMode::kJoint;

  nn::AdamConfig ad{cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
  nn::AdamConfig ag{cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
  auto dp = d_params(models);
  auto gp = g_params(models);
  nn::AdamState adam_d(const_view(dp), ad);
  nn::AdamState adam_g(const_view(gp), ag);

  Snapshot best = take_snapshot(models);
  double be_floor = std::numeric_limits<double>::infinity();
  double snap_be = std::numeric_limits<double>::infinity();
  double snap_pe = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int since_best = 0;

  // Block error decides convergence; epochs within a small tolerance of
  // the best block error seen so far defer to the refinement quality, so
  // trajectory training keeps its budget once block placement converges.
  const double be_tol = 0.3;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochStats stats =
        train_epoch_joint(models, dataset, cfg, adam_d, adam_g, epoch);
    validate_epoch(models, dataset, cfg, epoch, &stats);
    report.epochs.push_back(stats);

    be_floor = std::min(be_floor, stats.val_be);
    const bool in_range = stats.val_be <= be_floor + be_tol;
    const bool snap_in_range = snap_be <= be_floor + be_tol;
    const bool improved =
        in_range &&
        (best_epoch < 0 || !snap_in_range || stats.val_pe < snap_pe - 1e-9);
    if (improved) {
      snap_be = stats.val_be;
      snap_pe = stats.val_pe;
      best_epoch = epoch;
      best = take_snapshot(models);
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.patience) break;
  }

  if (best_epoch >= 0) restore_snapshot(models, best);
  report.best_epoch = best_epoch;
  report.best_val_be = best_epoch >= 0 ? snap_be : 0.0;
  report.best_val_pe = best_epoch >= 0 ? snap_pe : 0.0;
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return report;
}

namespace {

// Lane-change-only epoch for the sequential baseline's first stage.
EpochStats train_epoch_lc_only(GanModels& models, TrainDataset& dataset,
                               const TrainConfig& cfg, nn::AdamState& adam_d,
                               nn::AdamState& adam_g, int epoch) {
  EpochStats stats;
  Rng shuffle_rng = Rng(cfg.seed).fork(0xBA7C00 + epoch);
  Rng noise_rng = Rng(cfg.seed).fork(0x4015E00 + epoch);
  const int s_blocks = models.lc_cfg.blocks;
  const auto batches =
      make_batches(dataset.lc_train.size(), 0, cfg.batch_size, shuffle_rng);
  int n_batches = 0;

  for (const auto& batch : batches) {
    if (batch.empty()) continue;
    ++n_batches;
    const double bsz = static_cast<double>(batch.size());
    const auto perm = derangement(batch.size(), noise_rng);

    std::vector<std::vector<double>> z(batch.size()), gm(batch.size()),
        c(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& s = dataset.lc_train[batch[i].index];
      z[i] = draw_noise(s_blocks, noise_rng);
      gm[i] = models.lc_g.forward(z[i], s.cond, true, nullptr);
      c[i] = models.lc_g.conditions(s.cond);
    }

    {
      nn::NetworkGrads grads = models.lc_d.network().zero_grads();
      std::vector<double> sf, sm, sr;
      std::vector<std::vector<double>> rm_batch, gm_batch;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& s = dataset.lc_train[batch[i].index];
        LcDiscCache cf, cm, cr;
        const double s_fake = models.lc_d.forward(gm[i], c[i], true, &cf);
        const double s_real = models.lc_d.forward(s.rm_lc, c[i], true, &cr);
        sf.push_back(s_fake);
        sr.push_back(s_real);
        rm_batch.push_back(s.rm_lc);
        gm_batch.push_back(gm[i]);
        models.lc_d.backward(cf, grad_neg_log1m(s_fake, bsz), &grads, nullptr,
                             nullptr);
        models.lc_d.backward(cr, grad_neg_log(s_real, bsz), &grads, nullptr,
                             nullptr);
        if (batch.size() > 1) {
          const double s_mis =
              models.lc_d.forward(s.rm_lc, c[perm[i]], true, &cm);
          sm.push_back(s_mis);
          models.lc_d.backward(cm, grad_neg_log1m(s_mis, bsz), &grads, nullptr,
                               nullptr);
        } else {
          sm.push_back(0.0);
        }
      }
      auto flat = nn::Network::grad_tensors(grads);
      const double pre = nn::clip_global_norm(flat, cfg.clip_norm);
      stats.max_grad_norm_d =
          std::max(stats.max_grad_norm_d, std::min(pre, cfg.clip_norm));
      auto params = models.lc_d.network().parameter_tensors();
      adam_d.step(params, flat);
      stats.loss_lc_d +=
          loss_lcd(sf, sm, sr, rm_batch, gm_batch, cfg.omega_lc);
    }

    {
      nn::NetworkGrads grads = models.lc_g.network().zero_grads();
      nn::NumArray geo_grad =
          nn::NumArray::zeros_like(models.lc_g.geo_embedding());
      nn::NetworkGrads scratch = models.lc_d.network().zero_grads();
      std::vector<double> sf;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& s = dataset.lc_train[batch[i].index];
        LcGenCache g_cache;
        const auto zg = draw_noise(s_blocks, noise_rng);
        const auto gmg = models.lc_g.forward(zg, s.cond, true, &g_cache);
        const auto cg = models.lc_g.conditions(s.cond);
        LcDiscCache d_cache;
        const double s_fake = models.lc_d.forward(gmg, cg, true, &d_cache);
        sf.push_back(s_fake);
        std::vector<double> d_gm(s_blocks, 0.0), d_c(4 * s_blocks, 0.0);
        models.lc_d.backward(d_cache, grad_neg_log(s_fake, bsz), &scratch,
                             &d_gm, &d_c);
        for (int k = 0; k < s_blocks; ++k)
          d_gm[k] += cfg.omega_lc * 2.0 * (gmg[k] - s.rm_lc[k]) / bsz;
        models.lc_g.backward(g_cache, d_gm, &grads, &geo_grad);
        const std::vector<double> d_geo_seq(d_c.begin() + 3 * s_blocks,
                                            d_c.end());
        LcGenerator::accumulate_embedding_grad(s.cond.geo_onehot, d_geo_seq,
                                               &geo_grad);
      }
      auto flat = nn::Network::grad_tensors(grads);
      flat.push_back(&geo_grad);
      const double pre = nn::clip_global_norm(flat, cfg.clip_norm);
      stats.max_grad_norm_g =
          std::max(stats.max_grad_norm_g, std::min(pre, cfg.clip_norm));
      auto params = models.lc_g.network().parameter_tensors();
      params.push_back(&models.lc_g.geo_embedding());
      adam_g.step(params, flat);
      stats.loss_lc_g += loss_lcg(sf);
    }
  }
  if (n_batches > 0) {
    stats.loss_lc_d /= n_batches;
    stats.loss_lc_g /= n_batches;
  }
  return stats;
}

// Trajectory-only epoch against frozen lane-change conditions.
EpochStats train_epoch_traj_only(GanModels& models, TrainDataset& dataset,
                                 const std::vector<TrajSequence>& lc_conditions,
                                 const TrainConfig& cfg, nn::AdamState& adam_d,
                                 nn::AdamState& adam_g, int epoch) {
  EpochStats stats;
  Rng shuffle_rng = Rng(cfg.seed).fork(0x5EBA7C00 + epoch);
  Rng noise_rng = Rng(cfg.seed).fork(0x5E4015E0 + epoch);
  const int t_steps = models.traj_cfg.steps;
  const auto batches = make_batches(dataset.lc_train.size(),
                                    dataset.nolc_train.size(), cfg.batch_size,
                                    shuffle_rng);
  int n_batches = 0;

  for (const auto& batch : batches) {
    if (batch.empty()) continue;
    ++n_batches;
    const double bsz = static_cast<double>(batch.size());
    const auto perm = derangement(batch.size(), noise_rng);

    std::vector<const TrajSequence*> cond(batch.size());
    std::vector<const TrajSequence*> rm(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (batch[i].is_lc) {
        cond[i] = &lc_conditions[batch[i].index];
        rm[i] = &dataset.lc_train[batch[i].index].rm_traj;
      } else {
        cond[i] = &dataset.nolc_train[batch[i].index].c_traj;
        rm[i] = &dataset.nolc_train[batch[i].index].rm_traj;
      }
    }

    {
      nn::NetworkGrads grads = models.traj_d.network().zero_grads();
      std::vector<double> sf, sm, sr;
      std::vector<TrajSequence> rm_batch, gm_batch;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto z = draw_noise(t_steps, noise_rng);
        const TrajSequence gm =
            models.traj_g.forward(z, *cond[i], true, nullptr);
        TrajDiscCache cf, cm, cr;
        const double s_fake = models.traj_d.forward(gm, *cond[i], true, &cf);
        const double s_real = models.traj_d.forward(*rm[i], *cond[i], true, &cr);
        sf.push_back(s_fake);
        sr.push_back(s_real);
        rm_batch.push_back(*rm[i]);
        gm_batch.push_back(gm);
        models.traj_d.backward(cf, grad_neg_log1m(s_fake, bsz), &grads, nullptr,
                               nullptr);
        models.traj_d.backward(cr, grad_neg_log(s_real, bsz), &grads, nullptr,
                               nullptr);
        if (batch.size() > 1) {
          const double s_mis =
              models.traj_d.forward(*rm[i], *cond[perm[i]], true, &cm);
          sm.push_back(s_mis);
          models.traj_d.backward(cm, grad_neg_log1m(s_mis, bsz), &grads,
                                 nullptr, nullptr);
        } else {
          sm.push_back(0.0);
        }
      }
      auto flat = nn::Network::grad_tensors(grads);
      const double pre = nn::clip_global_norm(flat, cfg.clip_norm);
      stats.max_grad_norm_d =
          std::max(stats.max_grad_norm_d, std::min(pre, cfg.clip_norm));
      auto params = models.traj_d.network().parameter_tensors();
      adam_d.step(params, flat);
      stats.loss_traj_d +=
          loss_trajd(sf, sm, sr, rm_batch, gm_batch, cfg.omega_traj);
    }

    {
      nn::NetworkGrads grads = models.traj_g.network().zero_grads();
      nn::NetworkGrads scratch = models.traj_d.network().zero_grads();
      std::vector<double> sf;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        TrajGenCache g_cache;
        const auto z = draw_noise(t_steps, noise_rng);
        const TrajSequence gm =
            models.traj_g.forward(z, *cond[i], true, &g_cache);
        TrajDiscCache d_cache;
        const double s_fake = models.traj_d.forward(gm, *cond[i], true, &d_cache);
        sf.push_back(s_fake);
        std::vector<double> d_gm(t_steps, 0.0), d_cond(t_steps, 0.0);
        models.traj_d.backward(d_cache, grad_neg_log(s_fake, bsz), &scratch,
                               &d_gm, &d_cond);
        const int limit =
            std::min(rm[i]->steps() - 1, std::max(rm[i]->exit_step, gm.exit_step));
        for (int k = 0; k <= limit; ++k)
          d_gm[k] += cfg.omega_traj * 2.0 * (gm.values[k] - rm[i]->values[k]) / bsz;
        models.traj_g.backward(g_cache, d_gm, &grads, nullptr);
      }
      auto flat = nn::Network::grad_tensors(grads);
      const double pre = nn::clip_global_norm(flat, cfg.clip_norm);
      stats.max_grad_norm_g =
          std::max(stats.max_grad_norm_g, std::min(pre, cfg.clip_norm));
      auto params = models.traj_g.network().parameter_tensors();
      adam_g.step(params, flat);
      stats.loss_traj_g += loss_trajg(sf);
    }
  }
  if (n_batches > 0) {
    stats.loss_traj_d /= n_batches;
    stats.loss_traj_g /= n_batches;
  }
  return stats;
}

}  // namespace

TrainReport train_sequential(GanModels& models, TrainDataset& dataset,
                             const TrainConfig& cfg) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  TrainReport report;
  report.mode = TrainMode::kSequential;

  // Stage 1: lane-change networks to convergence.
  {
    nn::AdamConfig ad{cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
    nn::AdamConfig ag{cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
    auto dp = models.lc_d.network().parameter_tensors();
    auto gp = models.lc_g.network().parameter_tensors();
    gp.push_back(&models.lc_g.geo_embedding());
    nn::AdamState adam_d(const_view(dp), ad);
    nn::AdamState adam_g(const_view(gp), ag);

    Snapshot best = take_snapshot(models);
    double best_be = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int since_best = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      EpochStats stats =
          train_epoch_lc_only(models, dataset, cfg, adam_d, adam_g, epoch);
      validate_epoch(models, dataset, cfg, epoch, &stats);
      report.epochs.push_back(stats);
      if (stats.val_be < best_be - 1e-12) {
        best_be = stats.val_be;
        best_epoch = epoch;
        best = take_snapshot(models);
        since_best = 0;
      } else {
        ++since_best;
      }
      if (since_best >= cfg.patience) break;
    }
    if (best_epoch >= 0) {
      models.lc_g.network() = best.lc_g;
      models.lc_g.geo_embedding() = best.geo;
      models.lc_d.network() = best.lc_d;
    }
    report.best_epoch = best_epoch;
    report.best_val_be = best_epoch >= 0 ? best_be : 0.0;
  }

  // Frozen block choices become static trajectory conditions.
  std::vector<TrajSequence> lc_conditions;
  {
    Rng rng = Rng(cfg.seed).fork(0xF0E2E);
    for (auto& s : dataset.lc_train) {
      const auto dist = lc_distribution_eval(models.lc_g, s.cond, rng, 8);
      lc_conditions.push_back(s.splices.candidates[select_lcp(dist) - 1]);
    }
  }

  // Stage 2: trajectory networks against the frozen stage-1 outputs.
  {
    nn::AdamConfig ad{cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
    nn::AdamConfig ag{cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
    auto dp = models.traj_d.network().parameter_tensors();
    auto gp = models.traj_g.network().parameter_tensors();
    nn::AdamState adam_d(const_view(dp), ad);
    nn::AdamState adam_g(const_view(gp), ag);

    Snapshot best = take_snapshot(models);
    double best_pe = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int since_best = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      EpochStats stats = train_epoch_traj_only(models, dataset, lc_conditions,
                                               cfg, adam_d, adam_g, epoch);
      validate_epoch(models, dataset, cfg, cfg.epochs + epoch, &stats);
      report.epochs.push_back(stats);
      if (stats.val_pe < best_pe - 1e-12) {
        best_pe = stats.val_pe;
        best_epoch = epoch;
        best = take_snapshot(models);
        since_best = 0;
      } else {
        ++since_best;
      }
      if (since_best >= cfg.patience) break;
    }
    if (best_epoch >= 0) {
      models.traj_g.network() = best.traj_g;
      models.traj_d.network() = best.traj_d;
    }
    report.best_val_pe = best_epoch >= 0 ? best_pe : 0.0;
  }

  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return report;
}

namespace {

// A queue-heavy vehicle can still be mid-segment when its refinement
// window ends; the initial physics path supplies the remaining tail,
// time-shifted to joint the refined motion continuously.
void extend_with_initial(std::vector<TrajectorySample>* samples,
                         const Trajectory& initial, double segment_length,
                         double splice_x, LaneId origin, LaneId target) {
  if (samples->empty()) return;
  const auto& last = samples->back();
  if (last.x >= segment_length - 1e-6) return;
  const auto cross = initial.crossing_time(last.x);
  if (!cross.has_value()) return;
  const double shift = last.t - *cross;
  for (const auto& s : initial.samples()) {
    if (s.t <= *cross + 1e-12 || s.x <= last.x + 1e-12) continue;
    const LaneId lane =
        splice_x >= 0.0 ? (s.x < splice_x - 1e-9 ? origin : target) : origin;
    samples->push_back({s.t + shift, s.x, s.v, lane});
  }
}

}  // namespace

SceneResult reconstruct_scene(const ScenarioBundle& observed,
                              const DeductionResult& deduction, GanModels& models,
                              const PipelineParams& params, std::uint64_t seed) {
  const double length = observed.segment_length_m();
  const BlockGrid grid(length, params.grid_resolution_m);
  const LanePairVocab vocab(observed.lanes,
                            params.deduction.allow_non_adjacent_pairs);
  const double cycle = observed.signal.cycle_length_s();
  const int steps = models.traj_cfg.steps;
  const double dt = params.idm.dt;

  // Observability check: every lane-cycle with an arrival needs a probe.
  {
    for (const auto& lane : observed.lanes) {
      const auto arrivals = observed.events(lane.id, DetectorKind::kArrival);
      for (const auto& a : arrivals) {
        const int c = static_cast<int>(std::floor(
            (a.t - observed.signal.cycle_origin_s()) / cycle));
        bool covered = false;
        for (const auto& cv : observed.cv_trajectories) {
          if (cv.empty() || cv.front().lane != lane.id) continue;
          const int cv_cycle = static_cast<int>(std::floor(
              (cv.front().t - observed.signal.cycle_origin_s()) / cycle));
          if (cv_cycle == c) {
            covered = true;
            break;
          }
        }
        if (!covered)
          throw UnsupportedScenarioError(
              "no probe trajectory anchors lane " + std::to_string(lane.id) +
              " in cycle " + std::to_string(c));
      }
    }
  }

  std::map<LaneId, IdmParams> lane_params;
  for (const auto& lane : observed.lanes) {
    IdmParams p = params.idm;
    p.desired_speed = lane_desired_speed(observed, lane.id, params.idm);
    lane_params[lane.id] = p;
  }

  // Reconstructed lane segments, in processing order (pointer-stable).
  std::map<LaneId, std::deque<Trajectory>> lane_segments;
  auto last_segment = [&](LaneId lane) -> const Trajectory* {
    auto& dq = lane_segments[lane];
    return dq.empty() ? nullptr : &dq.back();
  };
  auto lane_segment_ptrs = [&](LaneId lane) {
    std::vector<const Trajectory*> out;
    for (const auto& t : lane_segments[lane]) out.push_back(&t);
    return out;
  };

  SceneResult result;
  Rng rng(Rng(seed).fork(0x2ECC).seed());

  std::vector<bool> cv_used(observed.cv_trajectories.size(), false);

  int item_index = 0;
  for (const auto& assignment : deduction.assignments) {
    const std::uint64_t stream = 0x100 + item_index++;
    // Probe passthrough?
    int cv_idx = -1;
    for (std::size_t i = 0; i < observed.cv_trajectories.size(); ++i) {
      const auto& cv = observed.cv_trajectories[i];
      if (cv_used[i] || cv.empty()) continue;
      if (cv.front().lane == assignment.origin_lane &&
          std::abs(cv.front().t - assignment.arrival.t) <=
              params.deduction.cv_match_tol_s) {
        cv_idx = static_cast<int>(i);
        break;
      }
    }
    if (cv_idx >= 0) {
      cv_used[cv_idx] = true;
      const auto& cv = observed.cv_trajectories[cv_idx];
      result.trajectories.emplace_back(cv.vehicle_id(),
                                       TrajectoryKind::kCvObserved, cv.samples());
      result.assignments.push_back(assignment);
      lane_segments[cv.front().lane].push_back(cv);
      continue;
    }

    const std::string id = "rec_" + std::to_string(result.trajectories.size());
    const LaneId origin = assignment.origin_lane;
    const Trajectory* leader_o = last_segment(origin);
    Trajectory hyp_o = generate_hypothetical_trajectory(
        assignment.arrival.t, observed.lane(origin), leader_o, observed.signal,
        lane_params[origin], id + "_hyp", LeaderEnd::kDeparts);

    if (!assignment.is_lcv()) {
      TrajSequence cond = resample_to_sequence(hyp_o, assignment.arrival.t, dt,
                                               steps, length);
      Rng draw_rng = rng.fork(stream);
      TrajSequence refined =
          refine_eval(models.traj_g, cond, draw_rng, params.eval_draws);
      if (leader_o != nullptr)
        refined = project_leader_feasible(refined, *leader_o,
                                          params.idm.queue_spacing);
      Trajectory window_traj =
          sequence_to_trajectory(refined, id, TrajectoryKind::kHvReconstructed,
                                 origin);
      std::vector<TrajectorySample> samples = window_traj.samples();
      extend_with_initial(&samples, hyp_o, length, -1.0, origin, origin);
      Trajectory traj(id, TrajectoryKind::kHvReconstructed, std::move(samples));
      lane_segments[origin].push_back(traj);
      result.trajectories.push_back(std::move(traj));
      result.assignments.push_back(assignment);
      continue;
    }

    // Lane changer: conditions, block choice, splice, refinement.
    const LaneId target = assignment.target_lane;
    const Trajectory* leader_t = last_segment(target);
    Trajectory hyp_t = generate_hypothetical_trajectory(
        assignment.arrival.t, observed.lane(target), leader_t, observed.signal,
        lane_params[target], id + "_hyp_t", LeaderEnd::kDeparts);

    const double t0 = hyp_o.front().t;
    const double t1 = hyp_o.back().t;
    const int profile_steps =
        std::max(2, static_cast<int>(std::ceil((t1 - t0) / dt)) + 2);
    const auto profile_o =
        queue_profile(lane_segment_ptrs(origin), grid, t0, profile_steps,
                      params.idm);
    const auto profile_t =
        queue_profile(lane_segment_ptrs(target), grid, t0, profile_steps,
                      params.idm);

    LcInput cond;
    cond.safety = safety_condition(hyp_o, lane_segment_ptrs(target), grid,
                                   params.safety, params.idm);
    cond.signal_origin = signal_condition(profile_o, hyp_o, grid);
    cond.signal_target = signal_condition(profile_t, hyp_o, grid);
    cond.geo_onehot = vocab.one_hot(origin, target);

    Rng draw_rng = rng.fork(stream);
    const auto dist =
        lc_distribution_eval(models.lc_g, cond, draw_rng, params.eval_draws);
    int block = select_lcp(dist);

    SplicedTrajectory spliced;
    bool spliced_ok = false;
    for (int offset = 0; offset < grid.block_count() && !spliced_ok; ++offset) {
      for (int sign : {+1, -1}) {
        const int b = block + sign * offset;
        if (b < 1 || b > grid.block_count()) continue;
        try {
          spliced = assemble_initial_lc_trajectory(hyp_o, hyp_t, b, grid, id);
          block = b;
          spliced_ok = true;
          break;
        } catch (const SpliceInfeasibleError&) {
        }
        if (offset == 0) break;  // same block twice
      }
    }
    if (!spliced_ok)
      throw SpliceInfeasibleError("no feasible splice block for " + id);

    TrajSequence cond_seq = resample_to_sequence(
        spliced.trajectory, assignment.arrival.t, dt, steps, length);
    TrajSequence refined =
        refine_eval(models.traj_g, cond_seq, draw_rng, params.eval_draws);

    // Leader-gap projection: origin leader below the splice point, target
    // leader above it.
    const double splice_frac = grid.block_start(block) / length;
    for (int k = 0; k < refined.steps(); ++k) {
      const Trajectory* ld =
          refined.values[k] < splice_frac ? leader_o : leader_t;
      if (ld == nullptr) continue;
      const auto s = ld->at_time(refined.time_of(k));
      if (!s.has_value()) continue;
      const double cap = (s->x - params.idm.queue_spacing) / length;
      refined.values[k] = std::min(refined.values[k], std::max(cap, 0.0));
    }
    for (int k = refined.steps() - 2; k >= 0; --k)
      refined.values[k] = std::min(refined.values[k], refined.values[k + 1]);
    refined.exit_step = TrajSequence::compute_exit(refined.values);

    // Build the lane-labeled trajectory.
    std::vector<TrajectorySample> samples;
    const int last = std::min(refined.exit_step, refined.steps() - 1);
    for (int k = 0; k <= last; ++k) {
      const double x = std::clamp(refined.values[k], 0.0, 1.0) * length;
      double v;
      if (k < last)
        v = std::max(0.0, (refined.values[k + 1] - refined.values[k]) * length / dt);
      else if (k > 0)
        v = std::max(0.0, (refined.values[k] - refined.values[k - 1]) * length / dt);
      else
        v = 0.0;
      const LaneId lane =
          x < grid.block_start(block) - 1e-9 ? origin : target;
      samples.push_back({refined.time_of(k), x, v, lane});
    }
    extend_with_initial(&samples, spliced.trajectory, length,
                        grid.block_start(block), origin, target);
    Trajectory traj(id, TrajectoryKind::kHvReconstructed, std::move(samples));

    LcEvent event = spliced.event;
    event.vehicle_id = id;
    event.lc_type = classify_lc_type(origin, target, observed.lanes);
    const auto lc_cross = traj.crossing_time(grid.block_start(block));
    if (lc_cross.has_value()) event.lc_time = *lc_cross;
    result.lc_events.push_back(event);

    auto origin_part = lane_restricted(traj, origin);
    auto target_part = lane_restricted(traj, target);
    if (origin_part.has_value())
      lane_segments[origin].push_back(std::move(*origin_part));
    if (target_part.has_value())
      lane_segments[target].push_back(std::move(*target_part));
    result.trajectories.push_back(std::move(traj));
    result.assignments.push_back(assignment);
  }
  return result;
}

}  // namespace artrec
