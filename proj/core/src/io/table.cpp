#include "artrec/io/table.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace artrec::io {

namespace {

constexpr double kFootToMetre = 0.3048;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

struct Header {
  std::string magic;
  std::string position_unit = "m";
  std::vector<std::string> columns;
  double frame_rate = 0.0;
};

// '#'-prefixed key/value header lines; returns the first data line.
Header read_header(std::istream& is, std::string* first_data_line,
                   std::size_t* line_no) {
  Header h;
  std::string line;
  while (std::getline(is, line)) {
    ++*line_no;
    if (line.empty()) continue;
    if (line[0] != '#') {
      *first_data_line = line;
      return h;
    }
    std::istringstream ls(line.substr(1));
    std::string key;
    ls >> key;
    if (h.magic.empty() && key.rfind("artrec-", 0) == 0) {
      h.magic = key;
      continue;
    }
    if (key == "units:") {
      ls >> h.position_unit;
    } else if (key == "columns:") {
      std::string col;
      while (ls >> col) h.columns.push_back(col);
    } else if (key == "frame_rate:") {
      ls >> h.frame_rate;
    }
  }
  *first_data_line = "";
  return h;
}

int column_of(const Header& h, const std::string& name) {
  for (std::size_t i = 0; i < h.columns.size(); ++i)
    if (h.columns[i] == name) return static_cast<int>(i);
  return -1;
}

}  // namespace

void write_trajectory_table(std::ostream& os,
                            const std::vector<Trajectory>& trajectories) {
  os << "# artrec-trajectory-table v1\n";
  os << "# units: m s mps\n";
  os << "# columns: vehicle_id time lane position speed\n";
  for (const auto& traj : trajectories) {
    for (const auto& s : traj.samples()) {
      os << traj.vehicle_id() << ' ' << fmt(s.t) << ' ' << s.lane << ' '
         << fmt(s.x) << ' ' << fmt(s.v) << '\n';
    }
  }
}

std::vector<Trajectory> read_trajectory_table(std::istream& is,
                                              ParseReport* report) {
  std::size_t line_no = 0;
  std::string line;
  Header h = read_header(is, &line, &line_no);
  if (h.columns.empty())
    throw SchemaError("trajectory table: missing '# columns:' header");
  const int c_id = column_of(h, "vehicle_id");
  const int c_time = column_of(h, "time");
  const int c_frame = column_of(h, "frame");
  const int c_lane = column_of(h, "lane");
  const int c_pos = column_of(h, "position");
  const int c_speed = column_of(h, "speed");
  if (c_id < 0 || c_lane < 0 || c_pos < 0 || c_speed < 0 ||
      (c_time < 0 && c_frame < 0))
    throw SchemaError("trajectory table: required column missing "
                      "(vehicle_id, time|frame, lane, position, speed)");
  if (c_frame >= 0 && h.frame_rate <= 0.0)
    throw SchemaError("trajectory table: frame column needs '# frame_rate:'");
  const double unit = h.position_unit == "ft" ? kFootToMetre : 1.0;
  if (h.position_unit != "m" && h.position_unit != "ft")
    throw SchemaError("trajectory table: unknown position unit '" +
                      h.position_unit + "'");

  struct Row {
    double t, x, v;
    LaneId lane;
  };
  std::map<std::string, std::vector<Row>> rows;
  std::vector<std::string> order;

  auto parse_line = [&](const std::string& text) {
    if (text.empty() || text[0] == '#') return;
    std::istringstream ls(text);
    std::vector<std::string> fields;
    std::string f;
    while (ls >> f) fields.push_back(f);
    if (fields.size() < h.columns.size()) {
      throw ParseError("trajectory table line " + std::to_string(line_no) +
                       ": expected " + std::to_string(h.columns.size()) +
                       " fields, got " + std::to_string(fields.size()));
    }
    try {
      Row r;
      r.t = c_time >= 0 ? std::stod(fields[c_time])
                        : std::stod(fields[c_frame]) / h.frame_rate;
      r.lane = std::stoi(fields[c_lane]);
      r.x = std::stod(fields[c_pos]) * unit;
      r.v = std::stod(fields[c_speed]) * unit;
      const auto& id = fields[c_id];
      if (rows.find(id) == rows.end()) order.push_back(id);
      rows[id].push_back(r);
      if (report) ++report->rows;
    } catch (const std::invalid_argument&) {
      throw ParseError("trajectory table line " + std::to_string(line_no) +
                       ": malformed numeric field");
    }
  };

  if (!line.empty()) parse_line(line);
  while (std::getline(is, line)) {
    ++line_no;
    parse_line(line);
  }

  std::vector<Trajectory> out;
  for (const auto& id : order) {
    auto& rs = rows[id];
    const bool sorted = std::is_sorted(
        rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
    if (!sorted) {
      std::stable_sort(rs.begin(), rs.end(),
                       [](const Row& a, const Row& b) { return a.t < b.t; });
      if (report) {
        ++report->warnings;
        report->messages.push_back("vehicle " + id + ": samples re-sorted by time");
      }
    }
    for (std::size_t i = 1; i < rs.size(); ++i) {
      if (rs[i].t == rs[i - 1].t)
        throw ParseError("trajectory table: duplicate timestamp for vehicle " + id);
    }
    std::vector<TrajectorySample> samples;
    for (const auto& r : rs) samples.push_back({r.t, r.x, r.v, r.lane});
    out.emplace_back(id, TrajectoryKind::kCvObserved, std::move(samples));
  }
  return out;
}

void write_detector_log(std::ostream& os, const std::vector<DetectorEvent>& events) {
  os << "# artrec-detector-log v1\n";
  os << "# columns: lane time kind tag\n";
  for (const auto& e : events) {
    os << e.lane << ' ' << fmt(e.t) << ' '
       << (e.kind == DetectorKind::kArrival ? "arrival" : "departure") << ' '
       << (e.vehicle_tag.has_value() ? *e.vehicle_tag : "-") << '\n';
  }
}

std::vector<DetectorEvent> read_detector_log(std::istream& is,
                                             ParseReport* report) {
  std::vector<DetectorEvent> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    DetectorEvent e;
    std::string kind, tag;
    if (!(ls >> e.lane >> e.t >> kind))
      throw ParseError("detector log line " + std::to_string(line_no) +
                       ": malformed row");
    if (kind == "arrival")
      e.kind = DetectorKind::kArrival;
    else if (kind == "departure")
      e.kind = DetectorKind::kDeparture;
    else
      throw ParseError("detector log line " + std::to_string(line_no) +
                       ": unknown kind '" + kind + "'");
    if (ls >> tag && tag != "-") e.vehicle_tag = tag;
    out.push_back(e);
    if (report) ++report->rows;
  }
  return out;
}

void write_lc_events(std::ostream& os, const std::vector<LcEvent>& events) {
  os << "# artrec-lc-events v1\n";
  os << "# columns: vehicle_id origin target block time type\n";
  for (const auto& e : events) {
    os << e.vehicle_id << ' ' << e.origin_lane << ' ' << e.target_lane << ' '
       << e.lc_block << ' ' << fmt(e.lc_time) << ' '
       << (e.lc_type == LcType::kMandatory ? "mlc" : "dlc") << '\n';
  }
}

std::vector<LcEvent> read_lc_events(std::istream& is) {
  std::vector<LcEvent> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    LcEvent e;
    std::string type;
    if (!(ls >> e.vehicle_id >> e.origin_lane >> e.target_lane >> e.lc_block >>
          e.lc_time >> type))
      throw ParseError("lc-event table line " + std::to_string(line_no) +
                       ": malformed row");
    e.lc_type = type == "mlc" ? LcType::kMandatory : LcType::kDiscretionary;
    out.push_back(e);
  }
  return out;
}

namespace {

template <typename WriteFn>
void save_file(const std::string& path, WriteFn fn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  fn(os);
  if (!os) throw IoError("write failed: " + path);
}

std::ifstream open_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  return is;
}

}  // namespace

void save_trajectory_table(const std::string& path,
                           const std::vector<Trajectory>& trajectories) {
  save_file(path, [&](std::ostream& os) { write_trajectory_table(os, trajectories); });
}

std::vector<Trajectory> load_trajectory_table(const std::string& path,
                                              ParseReport* report) {
  auto is = open_file(path);
  return read_trajectory_table(is, report);
}

void save_detector_log(const std::string& path,
                       const std::vector<DetectorEvent>& events) {
  save_file(path, [&](std::ostream& os) { write_detector_log(os, events); });
}

std::vector<DetectorEvent> load_detector_log(const std::string& path,
                                             ParseReport* report) {
  auto is = open_file(path);
  return read_detector_log(is, report);
}

void save_lc_events(const std::string& path, const std::vector<LcEvent>& events) {
  save_file(path, [&](std::ostream& os) { write_lc_events(os, events); });
}

std::vector<LcEvent> load_lc_events(const std::string& path) {
  auto is = open_file(path);
  return read_lc_events(is);
}

}  // namespace artrec::io
