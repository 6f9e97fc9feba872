#include "artrec/nn/losses.hpp"

#include <cmath>

namespace artrec::nn {

double safe_log(double x) { return std::log(std::max(x, kLogEps)); }

double safe_log_grad(double x) { return x > kLogEps ? 1.0 / x : 0.0; }

double adversarial_d_loss(const std::vector<double>& score_fake,
                          const std::vector<double>& score_mismatch,
                          const std::vector<double>& score_real) {
  const std::size_t b = score_real.size();
  if (b == 0 || score_fake.size() != b || score_mismatch.size() != b)
    throw InvalidParameterError("adversarial loss with mismatched batch sizes");
  double acc = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    acc += safe_log(1.0 - score_fake[i]) + safe_log(1.0 - score_mismatch[i]) +
           safe_log(score_real[i]);
  }
  return acc / static_cast<double>(b);
}

double adversarial_g_loss(const std::vector<double>& score_fake) {
  if (score_fake.empty())
    throw InvalidParameterError("generator loss with empty batch");
  double acc = 0.0;
  for (double s : score_fake) acc += safe_log(s);
  return -acc / static_cast<double>(score_fake.size());
}

}  // namespace artrec::nn
