#include "artrec/nn/optimizer.hpp"

#include <cmath>

namespace artrec::nn {

AdamState::AdamState(const std::vector<const NumArray*>& parameters,
                     AdamConfig config)
    : config_(config) {
  if (config_.learning_rate < 0.0 || config_.beta1 < 0.0 ||
      config_.beta1 >= 1.0 || config_.beta2 < 0.0 || config_.beta2 >= 1.0)
    throw InvalidParameterError("invalid optimizer configuration");
  for (const NumArray* p : parameters) {
    first_moment_.push_back(NumArray::zeros_like(*p));
    second_moment_.push_back(NumArray::zeros_like(*p));
  }
}

void AdamState::step(const std::vector<NumArray*>& parameters,
                     const std::vector<NumArray*>& gradients) {
  if (parameters.size() != first_moment_.size() ||
      gradients.size() != first_moment_.size())
    throw InvalidParameterError("optimizer step with mismatched tensor count");
  for (const NumArray* g : gradients) {
    if (!g->all_finite())
      throw TrainingDivergenceError("non-finite gradient in optimizer step");
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, step_);
  const double bc2 = 1.0 - std::pow(config_.beta2, step_);
  for (std::size_t t = 0; t < parameters.size(); ++t) {
    NumArray& p = *parameters[t];
    const NumArray& g = *gradients[t];
    NumArray& m = first_moment_[t];
    NumArray& v = second_moment_[t];
    if (p.size() != g.size() || p.size() != m.size())
      throw InvalidParameterError("optimizer tensor shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

double clip_global_norm(const std::vector<NumArray*>& gradients,
                        double clip_norm) {
  if (clip_norm <= 0.0)
    throw InvalidParameterError("clip norm must be positive");
  double sq = 0.0;
  for (const NumArray* g : gradients) sq += g->squared_norm();
  const double norm = std::sqrt(sq);
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (NumArray* g : gradients)
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] *= scale;
  }
  return norm;
}

}  // namespace artrec::nn
