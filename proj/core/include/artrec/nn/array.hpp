#pragma once

#include <cstddef>
#include <vector>

#include "artrec/error.hpp"
#include "artrec/rng.hpp"

namespace artrec::nn {

/// Dense row-major array of doubles with an explicit shape.
class NumArray {
 public:
  NumArray() = default;
  explicit NumArray(std::vector<int> shape);
  NumArray(std::vector<int> shape, std::vector<double> values);

  static NumArray zeros_like(const NumArray& other);

  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  void fill(double v);
  void fill_uniform(Rng& rng, double lo, double hi);
  bool all_finite() const;

  /// Squared L2 norm of the values.
  double squared_norm() const;

 private:
  std::vector<int> shape_;
  std::vector<double> values_;
};

std::size_t shape_size(const std::vector<int>& shape);

}  // namespace artrec::nn
