#pragma once

#include <cstdint>
#include <vector>

#include "artrec/nn/layers.hpp"

namespace artrec::nn {

/// Forward cache of a whole network, one entry per layer.
struct NetworkCache {
  std::vector<LayerCache> layers;
};

/// Gradients shaped like a network's parameters.
struct NetworkGrads {
  std::vector<std::vector<NumArray>> layers;

  void add_scaled(const NetworkGrads& other, double scale);
  void scale(double factor);
  double squared_norm() const;
  bool all_finite() const;
};

/// An ordered stack of layers with their parameters. Single-writer during
/// training; forward passes over a const snapshot are safe to run
/// concurrently when no cache or batchnorm update is involved.
class Network {
 public:
  Network() = default;
  Network(std::vector<LayerSpec> specs, std::uint64_t seed);

  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::vector<LayerParams>& params() { return params_; }
  const std::vector<LayerParams>& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t parameter_count() const;

  NumArray forward(const NumArray& input, bool training, NetworkCache* cache);

  /// Reverse-mode pass; returns dL/dinput and accumulates parameter
  /// gradients into `grads`.
  NumArray backward(const NetworkCache& cache, const NumArray& grad_out,
                    NetworkGrads* grads) const;

  NetworkGrads zero_grads() const;

  /// Flat views used by the optimizer: every trainable tensor in order.
  std::vector<NumArray*> parameter_tensors();
  std::vector<const NumArray*> parameter_tensors() const;
  static std::vector<NumArray*> grad_tensors(NetworkGrads& grads);

 private:
  std::vector<LayerSpec> specs_;
  std::vector<LayerParams> params_;
  std::uint64_t seed_ = 0;
};

}  // namespace artrec::nn
