#include "artrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace artrec {

namespace {

// Samples both trajectories on the real trajectory's dt grid over the
// shared time support.
struct AlignedSamples {
  std::vector<double> t, real_x, real_v, rec_x;
};

AlignedSamples align(const Trajectory& real, const Trajectory& rec, double dt) {
  const double t0 = std::max(real.front().t, rec.front().t);
  const double t1 = std::min(real.back().t, rec.back().t);
  if (t1 < t0)
    throw InvalidParameterError(
        "trajectories share no time support (vehicles " + real.vehicle_id() +
        ", " + rec.vehicle_id() + ")");
  AlignedSamples out;
  for (double t = t0; t <= t1 + 1e-9; t += dt) {
    const auto a = real.at_time(std::min(t, t1));
    const auto b = rec.at_time(std::min(t, t1));
    if (!a.has_value() || !b.has_value()) continue;
    out.t.push_back(t);
    out.real_x.push_back(a->x);
    out.real_v.push_back(a->v);
    out.rec_x.push_back(b->x);
  }
  return out;
}

double rms(const std::vector<double>& diffs) {
  double acc = 0.0;
  for (double d : diffs) acc += d * d;
  return std::sqrt(acc / diffs.size());
}

}  // namespace

std::optional<double> compute_qe(const Trajectory& real, const Trajectory& rec,
                                 const IdmParams& p) {
  const auto a = align(real, rec, p.dt);
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.t.size(); ++i) {
    if (a.real_v[i] < p.v_stop) diffs.push_back(a.real_x[i] - a.rec_x[i]);
  }
  if (diffs.empty()) return std::nullopt;
  return rms(diffs);
}

std::optional<double> compute_pe(const Trajectory& real, const Trajectory& rec,
                                 const IdmParams& p) {
  const auto a = align(real, rec, p.dt);
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.t.size(); ++i) {
    if (a.real_v[i] >= p.v_stop) diffs.push_back(a.real_x[i] - a.rec_x[i]);
  }
  if (diffs.empty()) return std::nullopt;
  return rms(diffs);
}

std::optional<double> compute_te(const Trajectory& real, const Trajectory& rec,
                                 const BlockGrid& grid) {
  std::vector<double> diffs;
  for (int b = 2; b <= grid.block_count(); ++b) {
    const double x = grid.block_start(b);
    const auto tr = real.crossing_time(x);
    const auto tc = rec.crossing_time(x);
    if (tr.has_value() && tc.has_value()) diffs.push_back(*tr - *tc);
  }
  if (diffs.empty()) return std::nullopt;
  return rms(diffs);
}

double compute_be(const std::vector<int>& real_blocks,
                  const std::vector<int>& est_blocks) {
  if (real_blocks.size() != est_blocks.size() || real_blocks.empty())
    throw InvalidParameterError("block error needs equal-length paired lists");
  double acc = 0.0;
  for (std::size_t i = 0; i < real_blocks.size(); ++i)
    acc += std::abs(real_blocks[i] - est_blocks[i]);
  return acc / static_cast<double>(real_blocks.size());
}

std::optional<int> baseline_rule_lcp(const std::vector<double>& safety,
                                     const std::vector<double>& signal_origin,
                                     const std::vector<double>& signal_target) {
  const std::size_t s = safety.size();
  if (signal_origin.size() != s || signal_target.size() != s)
    throw InvalidParameterError("condition sequence lengths differ");
  for (std::size_t b = 0; b < s; ++b) {
    if (safety[b] >= 1.0 && signal_origin[b] >= 1.0 && signal_target[b] >= 1.0)
      return static_cast<int>(b) + 1;
  }
  int best = -1;
  double best_p = -1.0;
  for (std::size_t b = 0; b < s; ++b) {
    if (signal_origin[b] < 1.0 || signal_target[b] < 1.0) continue;
    if (safety[b] > best_p + 1e-12) {
      best = static_cast<int>(b);
      best_p = safety[b];
    }
  }
  if (best < 0) return std::nullopt;
  return best + 1;
}

namespace {

// IDM acceleration of a follower state against an optional leader state.
double accel_against(const VehicleState& self,
                     const std::optional<VehicleState>& leader,
                     const IdmParams& p) {
  if (!leader.has_value())
    return idm_acceleration(self, std::nullopt, p);
  const double gap = std::max(leader->x - self.x - p.vehicle_length, 0.01);
  return idm_acceleration_from_gap(self.v, leader->v, gap, p);
}

}  // namespace

std::optional<int> baseline_utility_lcp(const UtilityBaselineInputs& in) {
  if (in.origin_hyp == nullptr || in.target_hyp == nullptr || in.grid == nullptr)
    throw InvalidParameterError("utility baseline needs both hypotheticals");
  const int s = in.grid->block_count();
  const auto times = block_entry_times(*in.origin_hyp, *in.grid);
  for (int b = 1; b <= s; ++b) {
    if (in.safety[b - 1] <= 0.0 || in.signal_origin[b - 1] < 1.0 ||
        in.signal_target[b - 1] < 1.0)
      continue;
    const double t = times[b - 1];
    const auto own = in.origin_hyp->at_time(t);
    if (!own.has_value()) continue;
    const VehicleState self{t, own->x, own->v};

    // Own acceleration on the current path, by finite difference.
    const auto own_next = in.origin_hyp->at_time(t + in.idm.dt);
    const double a_origin =
        own_next.has_value() ? (own_next->v - own->v) / in.idm.dt : 0.0;

    // Own acceleration behind the nearest preceding target-lane vehicle.
    std::optional<VehicleState> tgt_leader;
    std::optional<VehicleState> tgt_follower;
    for (const Trajectory* traj : in.target_lane) {
      if (traj == nullptr) continue;
      const auto st = traj->at_time(t);
      if (!st.has_value()) continue;
      if (st->x >= self.x &&
          (!tgt_leader.has_value() || st->x < tgt_leader->x))
        tgt_leader = VehicleState{t, st->x, st->v};
      if (st->x < self.x &&
          (!tgt_follower.has_value() || st->x > tgt_follower->x))
        tgt_follower = VehicleState{t, st->x, st->v};
    }
    const double a_target = accel_against(self, tgt_leader, in.idm);

    // Deceleration imposed on the target-lane follower by cutting in.
    double imposed = 0.0;
    if (tgt_follower.has_value()) {
      const double before = accel_against(*tgt_follower, tgt_leader, in.idm);
      const double after = accel_against(*tgt_follower,
                                         std::optional<VehicleState>(self),
                                         in.idm);
      imposed = std::max(0.0, before - after);
    }

    if (a_target - a_origin - in.politeness * imposed > in.threshold)
      return b;
  }
  return baseline_rule_lcp(in.safety, in.signal_origin, in.signal_target);
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  a.count = static_cast<int>(values.size());
  if (values.empty()) return a;
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / values.size();
  double var = 0.0;
  for (double v : values) var += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(var / values.size());
  return a;
}

MetricReport build_report(std::vector<VehicleMetrics> per_vehicle,
                          const std::map<std::string, BeRow>& baselines) {
  std::sort(per_vehicle.begin(), per_vehicle.end(),
            [](const VehicleMetrics& a, const VehicleMetrics& b) {
              return a.vehicle_id < b.vehicle_id;
            });
  MetricReport report;
  std::vector<double> qes, tes, pes, be_all, be_mlc, be_dlc;
  for (const auto& v : per_vehicle) {
    if (v.qe.has_value()) qes.push_back(*v.qe);
    if (v.te.has_value()) tes.push_back(*v.te);
    if (v.pe.has_value()) pes.push_back(*v.pe);
    if (v.is_lcv && v.real_block.has_value() && v.est_block.has_value()) {
      const double err = std::abs(*v.real_block - *v.est_block);
      be_all.push_back(err);
      (v.lc_type == LcType::kMandatory ? be_mlc : be_dlc).push_back(err);
    }
  }
  report.per_vehicle = std::move(per_vehicle);
  report.qe = aggregate(qes);
  report.te = aggregate(tes);
  report.pe = aggregate(pes);
  report.be.all = aggregate(be_all);
  report.be.mlc = aggregate(be_mlc);
  report.be.dlc = aggregate(be_dlc);
  report.baselines = baselines;
  return report;
}

namespace {

void print_agg(std::ostringstream& os, const char* name, const Aggregate& a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s mean %.4f std %.4f count %d\n", name,
                a.mean, a.stddev, a.count);
  os << buf;
}

std::string opt_str(const std::optional<double>& v) {
  if (!v.has_value()) return "na";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

}  // namespace

std::string serialize_report(const MetricReport& report) {
  std::ostringstream os;
  os << "artrec-metric-report v1\n";
  os << "vehicles " << report.per_vehicle.size() << '\n';
  print_agg(os, "qe", report.qe);
  print_agg(os, "te", report.te);
  print_agg(os, "pe", report.pe);
  print_agg(os, "be_all", report.be.all);
  print_agg(os, "be_mlc", report.be.mlc);
  print_agg(os, "be_dlc", report.be.dlc);
  for (const auto& [name, row] : report.baselines) {
    print_agg(os, ("baseline_" + name + "_all").c_str(), row.all);
    print_agg(os, ("baseline_" + name + "_mlc").c_str(), row.mlc);
    print_agg(os, ("baseline_" + name + "_dlc").c_str(), row.dlc);
  }
  os << "per_vehicle id qe te pe lcv type real_block est_block\n";
  for (const auto& v : report.per_vehicle) {
    os << v.vehicle_id << ' ' << opt_str(v.qe) << ' ' << opt_str(v.te) << ' '
       << opt_str(v.pe) << ' ' << (v.is_lcv ? 1 : 0) << ' '
       << (v.is_lcv ? (v.lc_type == LcType::kMandatory ? "mlc" : "dlc") : "-")
       << ' ' << (v.real_block.has_value() ? std::to_string(*v.real_block) : "na")
       << ' ' << (v.est_block.has_value() ? std::to_string(*v.est_block) : "na")
       << '\n';
  }
  return os.str();
}

std::string report_to_csv(const MetricReport& report) {
  std::ostringstream os;
  os << "vehicle_id,qe,te,pe,is_lcv,lc_type,real_block,est_block\n";
  for (const auto& v : report.per_vehicle) {
    os << v.vehicle_id << ',' << opt_str(v.qe) << ',' << opt_str(v.te) << ','
       << opt_str(v.pe) << ',' << (v.is_lcv ? 1 : 0) << ','
       << (v.is_lcv ? (v.lc_type == LcType::kMandatory ? "mlc" : "dlc") : "-")
       << ',' << (v.real_block.has_value() ? std::to_string(*v.real_block) : "na")
       << ',' << (v.est_block.has_value() ? std::to_string(*v.est_block) : "na")
       << '\n';
  }
  return os.str();
}

}  // namespace artrec
