#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "artrec/scenario.hpp"

namespace artrec::io {

struct SvgOptions {
  double px_per_s = 3.0;
  double px_per_m = 2.0;
  double margin = 42.0;
  double panel_gap = 30.0;
};

/// Time-space diagram: one panel per lane, reconstructed lane changers as
/// yellow dashed polylines, other reconstructed vehicles green dashed,
/// the ground-truth overlay grey dashed, lane-change positions as red
/// stars on their polyline, and red signal phases as bars at the stop
/// line. Output bytes are deterministic for identical inputs.
void write_timespace_svg(std::ostream& os, const std::vector<LaneGeometry>& lanes,
                         const std::vector<Trajectory>& reconstructed,
                         const std::vector<Trajectory>& real_overlay,
                         const std::vector<LcEvent>& lc_events,
                         const SignalPlan& signal, const SvgOptions& opt = {});

void save_timespace_svg(const std::string& path,
                        const std::vector<LaneGeometry>& lanes,
                        const std::vector<Trajectory>& reconstructed,
                        const std::vector<Trajectory>& real_overlay,
                        const std::vector<LcEvent>& lc_events,
                        const SignalPlan& signal, const SvgOptions& opt = {});

}  // namespace artrec::io
