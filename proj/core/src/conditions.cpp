#include "artrec/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace artrec {

void SafetyParams::validate() const {
  if (!(accept_gap_m > critical_gap_m) || critical_gap_m <= 0.0 || beta1 <= 0.0)
    throw InvalidParameterError(
        "safety parameters need accept_gap > critical_gap > 0 and beta1 > 0");
}

std::vector<double> ConditionBundle::concat() const {
  std::vector<double> out;
  const std::size_t s = safety.size();
  if (signal_origin.size() != s || signal_target.size() != s || geo.size() != s)
    throw InvalidParameterError("condition sequences have mismatched lengths");
  out.reserve(4 * s);
  out.insert(out.end(), safety.begin(), safety.end());
  out.insert(out.end(), signal_origin.begin(), signal_origin.end());
  out.insert(out.end(), signal_target.begin(), signal_target.end());
  out.insert(out.end(), geo.begin(), geo.end());
  return out;
}

ConditionBundle split_conditions(const std::vector<double>& c_lc) {
  if (c_lc.size() % 4 != 0)
    throw InvalidParameterError("concatenated condition length not divisible by 4");
  const std::size_t s = c_lc.size() / 4;
  ConditionBundle b;
  b.safety.assign(c_lc.begin(), c_lc.begin() + s);
  b.signal_origin.assign(c_lc.begin() + s, c_lc.begin() + 2 * s);
  b.signal_target.assign(c_lc.begin() + 2 * s, c_lc.begin() + 3 * s);
  b.geo.assign(c_lc.begin() + 3 * s, c_lc.end());
  return b;
}

std::vector<double> block_entry_times(const Trajectory& hypothetical,
                                      const BlockGrid& grid) {
  std::vector<double> times(grid.block_count());
  for (int b = 1; b <= grid.block_count(); ++b) {
    const auto t = hypothetical.crossing_time(grid.block_start(b));
    if (!t.has_value())
      throw InsufficientHorizonError(
          "hypothetical trajectory does not reach block " + std::to_string(b));
    times[b - 1] = *t;
  }
  return times;
}

double safety_probability(double gap, const SafetyParams& sp) {
  if (gap >= sp.accept_gap_m) return 1.0;
  if (gap <= sp.critical_gap_m) return 0.0;
  const double mid = 0.5 * (sp.accept_gap_m + sp.critical_gap_m);
  return 1.0 / (1.0 + std::exp(-(sp.beta0 + sp.beta1 * (gap - mid))));
}

std::vector<double> safety_condition(const Trajectory& hypothetical,
                                     const std::vector<const Trajectory*>& target_lane,
                                     const BlockGrid& grid, const SafetyParams& sp,
                                     const IdmParams& p) {
  sp.validate();
  const auto times = block_entry_times(hypothetical, grid);
  std::vector<double> out(grid.block_count(), 1.0);
  for (int b = 1; b <= grid.block_count(); ++b) {
    const double t = times[b - 1];
    const double own_x = grid.block_start(b);
    double nearest_ahead = std::numeric_limits<double>::infinity();
    for (const Trajectory* traj : target_lane) {
      if (traj == nullptr) continue;
      const auto s = traj->at_time(t);
      if (!s.has_value()) continue;
      if (s->x >= own_x && s->x < nearest_ahead) nearest_ahead = s->x;
    }
    if (std::isinf(nearest_ahead)) continue;  // empty target lane ahead: feasible
    const double gap = nearest_ahead - own_x - p.vehicle_length;
    out[b - 1] = safety_probability(gap, sp);
  }
  return out;
}

std::vector<double> signal_condition(const QueueProfile& profile,
                                     const Trajectory& hypothetical,
                                     const BlockGrid& grid) {
  const auto times = block_entry_times(hypothetical, grid);
  std::vector<double> out(grid.block_count(), 1.0);
  for (int b = 1; b <= grid.block_count(); ++b) {
    out[b - 1] =
        profile.at(times[b - 1], b) == QueueState::kStationary ? 0.0 : 1.0;
  }
  return out;
}

LanePairVocab::LanePairVocab(const std::vector<LaneGeometry>& lanes,
                             bool include_non_adjacent) {
  std::vector<LaneId> ids;
  for (const auto& l : lanes) ids.push_back(l.id);
  std::sort(ids.begin(), ids.end());
  for (LaneId o : ids) {
    const auto& lane_o = *std::find_if(lanes.begin(), lanes.end(),
                                       [&](const LaneGeometry& l) { return l.id == o; });
    for (LaneId t : ids) {
      if (o == t) continue;
      if (lane_o.is_adjacent(t) || include_non_adjacent)
        pairs_.emplace_back(o, t);
    }
  }
}

int LanePairVocab::index_of(LaneId origin, LaneId target) const {
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (pairs_[i].first == origin && pairs_[i].second == target)
      return static_cast<int>(i);
  }
  throw OutOfRangeError("unknown origin-target lane pair " +
                        std::to_string(origin) + "->" + std::to_string(target));
}

std::vector<double> LanePairVocab::one_hot(LaneId origin, LaneId target) const {
  std::vector<double> out(pairs_.size(), 0.0);
  out[index_of(origin, target)] = 1.0;
  return out;
}

std::vector<double> embed_geo(const std::vector<double>& embedding, int vocab,
                              int blocks, const std::vector<double>& one_hot) {
  if (embedding.size() != static_cast<std::size_t>(vocab) * blocks ||
      one_hot.size() != static_cast<std::size_t>(vocab))
    throw InvalidParameterError("geo embedding shape mismatch");
  std::vector<double> out(blocks, 0.0);
  for (int v = 0; v < vocab; ++v) {
    if (one_hot[v] == 0.0) continue;
    for (int s = 0; s < blocks; ++s)
      out[s] += one_hot[v] * embedding[static_cast<std::size_t>(v) * blocks + s];
  }
  return out;
}

LcType classify_lc_type(LaneId origin, LaneId target,
                        const std::vector<LaneGeometry>& lanes) {
  auto movement_of = [&](LaneId id) {
    for (const auto& l : lanes)
      if (l.id == id) return l.movement;
    throw OutOfRangeError("unknown lane id " + std::to_string(id));
  };
  return movement_of(origin) == movement_of(target) ? LcType::kDiscretionary
                                                    : LcType::kMandatory;
}

}  // namespace artrec
