#pragma once

#include <string>

#include "artrec/synth.hpp"
#include "artrec/trainer.hpp"

namespace artrec::io {

/// All pipeline parameter groups in one layered document: built-in
/// defaults, overridden by a JSON config file, overridden by CLI flags.
struct RunConfig {
  PipelineParams pipeline;
  TrainConfig train;
  SynthConfig synth = two_lane_benchmark(42);

  /// Propagates one seed to every stochastic component.
  void reseed(std::uint64_t seed);
};

RunConfig default_run_config();

/// Applies the keys present in a JSON document over `cfg`.
void apply_config_json(const std::string& json_text, RunConfig* cfg);

RunConfig load_run_config(const std::string& path);

}  // namespace artrec::io
