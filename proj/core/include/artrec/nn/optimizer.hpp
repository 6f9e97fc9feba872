#pragma once

#include <vector>

#include "artrec/nn/array.hpp"

namespace artrec::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer state over an ordered set of parameter
/// tensors. The tensor ordering must stay fixed across steps.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const std::vector<const NumArray*>& parameters, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  long step_count() const { return step_; }

  /// One update. Gradients must be finite; throws on divergence.
  void step(const std::vector<NumArray*>& parameters,
            const std::vector<NumArray*>& gradients);

 private:
  AdamConfig config_;
  std::vector<NumArray> first_moment_;
  std::vector<NumArray> second_moment_;
  long step_ = 0;
};

/// Scales the gradient set so its global L2 norm does not exceed
/// clip_norm; returns the pre-clip norm.
double clip_global_norm(const std::vector<NumArray*>& gradients,
                        double clip_norm);

}  // namespace artrec::nn
