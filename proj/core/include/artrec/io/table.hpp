#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "artrec/scenario.hpp"

namespace artrec::io {

struct ParseReport {
  std::size_t rows = 0;
  std::size_t warnings = 0;
  std::vector<std::string> messages;
};

/// Trajectory table: '#'-prefixed typed header (units, columns, optional
/// frame rate) followed by whitespace-separated rows, one per sample.
/// Positions are written in metres; feet inputs are converted on ingest.
void write_trajectory_table(std::ostream& os, const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> read_trajectory_table(std::istream& is,
                                              ParseReport* report = nullptr);

void save_trajectory_table(const std::string& path,
                           const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> load_trajectory_table(const std::string& path,
                                              ParseReport* report = nullptr);

/// Detector log: lane, timestamp, arrival|departure, optional tag.
void write_detector_log(std::ostream& os, const std::vector<DetectorEvent>& events);
std::vector<DetectorEvent> read_detector_log(std::istream& is,
                                             ParseReport* report = nullptr);

void save_detector_log(const std::string& path,
                       const std::vector<DetectorEvent>& events);
std::vector<DetectorEvent> load_detector_log(const std::string& path,
                                             ParseReport* report = nullptr);

/// Lane-change event table (labels or reconstruction output).
void write_lc_events(std::ostream& os, const std::vector<LcEvent>& events);
std::vector<LcEvent> read_lc_events(std::istream& is);

void save_lc_events(const std::string& path, const std::vector<LcEvent>& events);
std::vector<LcEvent> load_lc_events(const std::string& path);

}  // namespace artrec::io
