#include "artrec/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace artrec {

std::string to_string(Movement m) {
  switch (m) {
    case Movement::kLeftTurn:
      return "left_turn";
    case Movement::kThrough:
      return "through";
    case Movement::kRightTurn:
      return "right_turn";
  }
  return "through";
}

Movement movement_from_string(const std::string& s) {
  if (s == "left_turn") return Movement::kLeftTurn;
  if (s == "through") return Movement::kThrough;
  if (s == "right_turn") return Movement::kRightTurn;
  throw SchemaError("unknown movement: " + s);
}

bool LaneGeometry::is_adjacent(LaneId other) const {
  return std::find(adjacent.begin(), adjacent.end(), other) != adjacent.end();
}

SignalPlan::SignalPlan(double cycle_length_s, std::vector<SignalPhase> phases,
                       double cycle_origin_s)
    : cycle_length_s_(cycle_length_s),
      cycle_origin_s_(cycle_origin_s),
      phases_(std::move(phases)) {
  if (cycle_length_s_ <= 0.0)
    throw InvalidParameterError("signal cycle length must be positive");
  for (const auto& ph : phases_) {
    if (ph.green_start_s < 0.0 || ph.green_end_s > cycle_length_s_ ||
        ph.green_start_s >= ph.green_end_s) {
      throw InvalidParameterError("signal phase window outside cycle");
    }
    if (ph.movements.empty())
      throw InvalidParameterError("signal phase with no movements");
  }
}

double SignalPlan::cycle_offset(double t) const {
  double off = std::fmod(t - cycle_origin_s_, cycle_length_s_);
  if (off < 0.0) off += cycle_length_s_;
  return off;
}

double SignalPlan::cycle_start(double t) const {
  return t - cycle_offset(t);
}

bool SignalPlan::serves(Movement movement) const {
  for (const auto& ph : phases_) {
    if (std::find(ph.movements.begin(), ph.movements.end(), movement) !=
        ph.movements.end())
      return true;
  }
  return false;
}

bool SignalPlan::is_green(double t, Movement movement) const {
  if (!serves(movement))
    throw InvalidParameterError("movement not present in signal plan: " +
                                to_string(movement));
  const double off = cycle_offset(t);
  for (const auto& ph : phases_) {
    if (std::find(ph.movements.begin(), ph.movements.end(), movement) ==
        ph.movements.end())
      continue;
    if (off >= ph.green_start_s && off < ph.green_end_s) return true;
  }
  return false;
}

Trajectory::Trajectory(std::string vehicle_id, TrajectoryKind kind,
                       std::vector<TrajectorySample> samples)
    : vehicle_id_(std::move(vehicle_id)),
      kind_(kind),
      samples_(std::move(samples)) {
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].v < 0.0) {
      throw InvalidParameterError("trajectory " + vehicle_id_ +
                                  ": negative speed");
    }
    if (i > 0) {
      if (samples_[i].t <= samples_[i - 1].t)
        throw InvalidParameterError("trajectory " + vehicle_id_ +
                                    ": sample times not strictly increasing");
      if (samples_[i].x < samples_[i - 1].x - 1e-9)
        throw InvalidParameterError("trajectory " + vehicle_id_ +
                                    ": position decreases over time");
    }
  }
}

std::optional<TrajectorySample> Trajectory::at_time(double t) const {
  if (samples_.empty() || t < samples_.front().t - 1e-9 ||
      t > samples_.back().t + 1e-9)
    return std::nullopt;
  auto it = std::lower_bound(samples_.begin(), samples_.end(), t,
                             [](const TrajectorySample& s, double tt) {
                               return s.t < tt;
                             });
  if (it == samples_.begin()) return samples_.front();
  if (it == samples_.end()) return samples_.back();
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (t - lo.t) / (hi.t - lo.t);
  TrajectorySample out;
  out.t = t;
  out.x = lo.x + w * (hi.x - lo.x);
  out.v = lo.v + w * (hi.v - lo.v);
  out.lane = w < 0.5 ? lo.lane : hi.lane;
  return out;
}

std::optional<double> Trajectory::crossing_time(double x) const {
  if (samples_.empty() || samples_.back().x < x) return std::nullopt;
  if (samples_.front().x >= x) return samples_.front().t;
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (samples_[i].x >= x) {
      const auto& lo = samples_[i - 1];
      const auto& hi = samples_[i];
      if (hi.x == lo.x) return hi.t;
      const double w = (x - lo.x) / (hi.x - lo.x);
      return lo.t + w * (hi.t - lo.t);
    }
  }
  return std::nullopt;
}

std::vector<std::size_t> Trajectory::lane_change_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (samples_[i].lane != samples_[i - 1].lane) out.push_back(i);
  }
  return out;
}

namespace {

int block_count_for(double length, double resolution) {
  const double q = length / resolution;
  const double rounded = std::round(q);
  // Snap near-integer quotients so unit-converted lengths (e.g. feet)
  // do not spill into a phantom extra block.
  if (std::abs(q - rounded) < 1e-9 * std::max(1.0, q))
    return static_cast<int>(rounded);
  return static_cast<int>(std::ceil(q));
}

}  // namespace

BlockGrid::BlockGrid(double segment_length_m, double resolution_m)
    : segment_length_m_(segment_length_m), resolution_m_(resolution_m) {
  if (segment_length_m_ <= 0.0 || resolution_m_ <= 0.0)
    throw InvalidParameterError("block grid needs positive length and resolution");
  block_count_ = block_count_for(segment_length_m_, resolution_m_);
}

int BlockGrid::block_of(double x) const {
  if (x < -1e-9 || x > segment_length_m_ + 1e-9)
    throw OutOfRangeError("position outside segment: " + std::to_string(x));
  const int idx = 1 + static_cast<int>(std::floor(x / resolution_m_ + 1e-9));
  return std::min(idx, block_count_);
}

double BlockGrid::block_start(int block) const {
  if (block < 1 || block > block_count_)
    throw OutOfRangeError("block index out of range");
  return (block - 1) * resolution_m_;
}

double BlockGrid::block_end(int block) const {
  if (block < 1 || block > block_count_)
    throw OutOfRangeError("block index out of range");
  return std::min(block * resolution_m_, segment_length_m_);
}

std::vector<double> encode_lcp(const BlockGrid& grid, int lc_block) {
  if (lc_block < 1 || lc_block > grid.block_count())
    throw OutOfRangeError("lc_block outside grid");
  std::vector<double> out(grid.block_count(), 0.0);
  out[lc_block - 1] = 1.0;
  return out;
}

int decode_lcp(const std::vector<double>& encoding) {
  if (encoding.empty()) throw InvalidParameterError("empty block encoding");
  std::size_t best = 0;
  for (std::size_t i = 1; i < encoding.size(); ++i) {
    if (encoding[i] > encoding[best]) best = i;
  }
  return static_cast<int>(best) + 1;
}

const LaneGeometry& ScenarioBundle::lane(LaneId id) const {
  for (const auto& l : lanes) {
    if (l.id == id) return l;
  }
  throw OutOfRangeError("unknown lane id " + std::to_string(id));
}

double ScenarioBundle::segment_length_m() const {
  if (lanes.empty()) throw InvalidParameterError("scenario has no lanes");
  return lanes.front().segment_length_m;
}

double ScenarioBundle::downstream_detector_m() const {
  return detector_position_m > 0.0 ? detector_position_m : segment_length_m();
}

std::vector<DetectorEvent> ScenarioBundle::events(LaneId lane,
                                                  DetectorKind kind) const {
  std::vector<DetectorEvent> out;
  for (const auto& e : detectors) {
    if (e.lane == lane && e.kind == kind) out.push_back(e);
  }
  std::sort(out.begin(), out.end(),
            [](const DetectorEvent& a, const DetectorEvent& b) { return a.t < b.t; });
  return out;
}

void ScenarioBundle::validate() const {
  if (lanes.empty()) throw InvalidParameterError("scenario has no lanes");
  const double len = lanes.front().segment_length_m;
  for (const auto& l : lanes) {
    if (l.segment_length_m <= 0.0)
      throw InvalidParameterError("lane with non-positive length");
    if (std::abs(l.segment_length_m - len) > 1e-9)
      throw InvalidParameterError("lanes with differing segment lengths");
    for (LaneId other : l.adjacent) {
      if (!lane(other).is_adjacent(l.id)) {
        std::ostringstream oss;
        oss << "lane adjacency not symmetric between " << l.id << " and " << other;
        throw InvalidParameterError(oss.str());
      }
    }
    if (!signal.serves(l.movement))
      throw InvalidParameterError("signal plan lacks a phase for movement " +
                                  to_string(l.movement));
  }
  for (const auto& traj : cv_trajectories) {
    for (const auto& s : traj.samples()) {
      if (s.x < -1e-6 || s.x > len + 1e-6)
        throw InvalidParameterError("trajectory " + traj.vehicle_id() +
                                    " leaves the segment bounds");
    }
  }
}

}  // namespace artrec
