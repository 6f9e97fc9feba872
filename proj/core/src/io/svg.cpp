#include "artrec/io/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace artrec::io {

namespace {

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Five-point star path centred on the origin.
std::string star_path(double r) {
  std::ostringstream d;
  for (int i = 0; i < 10; ++i) {
    const double angle = -1.5707963267948966 + i * 0.6283185307179586;
    const double radius = i % 2 == 0 ? r : 0.42 * r;
    d << (i == 0 ? "M" : "L") << px(radius * std::cos(angle)) << ','
      << px(radius * std::sin(angle));
  }
  d << "Z";
  return d.str();
}

}  // namespace

void write_timespace_svg(std::ostream& os, const std::vector<LaneGeometry>& lanes,
                         const std::vector<Trajectory>& reconstructed,
                         const std::vector<Trajectory>& real_overlay,
                         const std::vector<LcEvent>& lc_events,
                         const SignalPlan& signal, const SvgOptions& opt) {
  if (lanes.empty()) throw InvalidParameterError("diagram needs lanes");
  if (reconstructed.empty() && real_overlay.empty())
    throw InvalidParameterError("diagram needs at least one trajectory");

  double t0 = std::numeric_limits<double>::infinity();
  double t1 = -std::numeric_limits<double>::infinity();
  for (const auto* set : {&reconstructed, &real_overlay}) {
    for (const auto& traj : *set) {
      if (traj.empty()) continue;
      t0 = std::min(t0, traj.front().t);
      t1 = std::max(t1, traj.back().t);
    }
  }
  t0 = std::floor(t0);
  t1 = std::ceil(t1) + 1.0;
  const double length = lanes.front().segment_length_m;

  const double plot_w = (t1 - t0) * opt.px_per_s;
  const double panel_h = length * opt.px_per_m;
  const double width = plot_w + 2.0 * opt.margin;
  const double height = lanes.size() * (panel_h + opt.panel_gap) + opt.margin;

  std::set<std::string> lcv_ids;
  for (const auto& e : lc_events) lcv_ids.insert(e.vehicle_id);

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(width)
     << "\" height=\"" << px(height) << "\" font-family=\"monospace\">\n";
  os << "<rect width=\"" << px(width) << "\" height=\"" << px(height)
     << "\" fill=\"white\"/>\n";

  for (std::size_t li = 0; li < lanes.size(); ++li) {
    const auto& lane = lanes[li];
    const double top = opt.margin * 0.5 + li * (panel_h + opt.panel_gap);
    auto x_of = [&](double t) { return opt.margin + (t - t0) * opt.px_per_s; };
    auto y_of = [&](double x) { return top + (length - x) * opt.px_per_m; };

    os << "<g class=\"panel\" data-lane=\"" << lane.id << "\">\n";
    os << "<rect x=\"" << px(opt.margin) << "\" y=\"" << px(top) << "\" width=\""
       << px(plot_w) << "\" height=\"" << px(panel_h)
       << "\" fill=\"none\" stroke=\"#ccc\"/>\n";
    os << "<text x=\"" << px(opt.margin) << "\" y=\"" << px(top - 4.0)
       << "\" font-size=\"11\">lane " << lane.id << " (" << to_string(lane.movement)
       << ")</text>\n";

    // Red signal phases as bars at the stop line.
    const double cycle = signal.cycle_length_s();
    for (double cs = signal.cycle_start(t0); cs < t1; cs += cycle) {
      double red_start = -1.0;
      for (double t = cs; t <= cs + cycle + 1e-9; t += 0.5) {
        const bool green = t < cs + cycle ? signal.is_green(t, lane.movement) : true;
        if (!green && red_start < 0.0) red_start = t;
        if (green && red_start >= 0.0) {
          const double a = std::max(red_start, t0);
          const double b = std::min(t, t1);
          if (b > a) {
            os << "<rect class=\"red-phase\" x=\"" << px(x_of(a)) << "\" y=\""
               << px(y_of(length) - 1.5) << "\" width=\"" << px((b - a) * opt.px_per_s)
               << "\" height=\"3\" fill=\"#d33\"/>\n";
          }
          red_start = -1.0;
        }
      }
    }

    // Polylines, split at lane departures; overlay first so it sits
    // underneath the reconstruction.
    struct Layer {
      const std::vector<Trajectory>* set;
      bool overlay;
    };
    for (const Layer layer : {Layer{&real_overlay, true}, Layer{&reconstructed, false}}) {
      for (const auto& traj : *layer.set) {
        std::vector<std::string> runs;
        std::string current;
        for (const auto& s : traj.samples()) {
          if (s.lane != lane.id) {
            if (!current.empty()) runs.push_back(std::move(current));
            current.clear();
            continue;
          }
          if (!current.empty()) current += ' ';
          current += px(x_of(s.t)) + "," + px(y_of(s.x));
        }
        if (!current.empty()) runs.push_back(std::move(current));
        const char* color = layer.overlay ? "#999999"
                            : lcv_ids.count(traj.vehicle_id()) ? "#e6c300"
                                                               : "#2e8b57";
        for (const auto& pts : runs) {
          if (pts.find(' ') == std::string::npos) continue;  // single point
          os << "<polyline class=\"" << (layer.overlay ? "truth" : "rec")
             << "\" data-vehicle=\"" << traj.vehicle_id() << "\" points=\"" << pts
             << "\" fill=\"none\" stroke=\"" << color
             << "\" stroke-width=\"1.2\" stroke-dasharray=\"5,3\"/>\n";
        }
      }
    }

    // Lane-change markers on the target-lane panel, on the polyline.
    for (const auto& e : lc_events) {
      if (e.target_lane != lane.id) continue;
      const Trajectory* traj = nullptr;
      for (const auto& t : reconstructed) {
        if (t.vehicle_id() == e.vehicle_id) traj = &t;
      }
      if (traj == nullptr) continue;
      const auto s = traj->at_time(e.lc_time);
      if (!s.has_value()) continue;
      os << "<g class=\"lcstar\" data-vehicle=\"" << e.vehicle_id
         << "\" transform=\"translate(" << px(x_of(s->t)) << ',' << px(y_of(s->x))
         << ")\"><path d=\"" << star_path(5.0) << "\" fill=\"#d11\"/></g>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
}

void save_timespace_svg(const std::string& path,
                        const std::vector<LaneGeometry>& lanes,
                        const std::vector<Trajectory>& reconstructed,
                        const std::vector<Trajectory>& real_overlay,
                        const std::vector<LcEvent>& lc_events,
                        const SignalPlan& signal, const SvgOptions& opt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  write_timespace_svg(os, lanes, reconstructed, real_overlay, lc_events, signal,
                      opt);
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace artrec::io
