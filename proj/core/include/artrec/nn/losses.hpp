#pragma once

#include <vector>

#include "artrec/error.hpp"

namespace artrec::nn {

// Guard for adversarial log terms: scores of exactly 0 keep the loss
// finite, scores of exactly 1 still evaluate to an exact 0 loss.
constexpr double kLogEps = 1e-7;

double safe_log(double x);

/// Derivative of safe_log (zero inside the clamped region).
double safe_log_grad(double x);

/// Mean over the batch of log(1-D(fake,c)) + log(1-D(real,shuffled)) +
/// log(D(real,c)); the discriminator is trained by ascent on this value.
double adversarial_d_loss(const std::vector<double>& score_fake,
                          const std::vector<double>& score_mismatch,
                          const std::vector<double>& score_real);

/// -mean log D(fake, c); minimized by the generator.
double adversarial_g_loss(const std::vector<double>& score_fake);

}  // namespace artrec::nn
