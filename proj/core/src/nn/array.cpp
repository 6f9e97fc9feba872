#include "artrec/nn/array.hpp"

#include <cmath>

namespace artrec::nn {

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw InvalidParameterError("array shape with non-positive dim");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

NumArray::NumArray(std::vector<int> shape)
    : shape_(std::move(shape)), values_(shape_size(shape_), 0.0) {}

NumArray::NumArray(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_))
    throw InvalidParameterError("array value count does not match shape");
}

NumArray NumArray::zeros_like(const NumArray& other) {
  return NumArray(other.shape_);
}

void NumArray::fill(double v) {
  for (auto& x : values_) x = v;
}

void NumArray::fill_uniform(Rng& rng, double lo, double hi) {
  for (auto& x : values_) x = rng.uniform(lo, hi);
}

bool NumArray::all_finite() const {
  for (double x : values_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double NumArray::squared_norm() const {
  double s = 0.0;
  for (double x : values_) s += x * x;
  return s;
}

}  // namespace artrec::nn
