#include "artrec/nn/network.hpp"

namespace artrec::nn {

void NetworkGrads::add_scaled(const NetworkGrads& other, double scale) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t t = 0; t < layers[l].size(); ++t) {
      auto& dst = layers[l][t];
      const auto& src = other.layers[l][t];
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    }
  }
}

void NetworkGrads::scale(double factor) {
  for (auto& layer : layers)
    for (auto& tensor : layer)
      for (std::size_t i = 0; i < tensor.size(); ++i) tensor[i] *= factor;
}

double NetworkGrads::squared_norm() const {
  double s = 0.0;
  for (const auto& layer : layers)
    for (const auto& tensor : layer) s += tensor.squared_norm();
  return s;
}

bool NetworkGrads::all_finite() const {
  for (const auto& layer : layers)
    for (const auto& tensor : layer)
      if (!tensor.all_finite()) return false;
  return true;
}

Network::Network(std::vector<LayerSpec> specs, std::uint64_t seed)
    : specs_(std::move(specs)), seed_(seed) {
  Rng rng(seed);
  params_.reserve(specs_.size());
  for (const auto& spec : specs_) params_.push_back(init_layer_params(spec, rng));
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    for (const auto& t : p.tensors) n += t.size();
  return n;
}

NumArray Network::forward(const NumArray& input, bool training,
                          NetworkCache* cache) {
  if (cache) cache->layers.assign(specs_.size(), LayerCache{});
  NumArray x = input;
  for (std::size_t l = 0; l < specs_.size(); ++l) {
    x = layer_forward(specs_[l], params_[l], x, training,
                      cache ? &cache->layers[l] : nullptr);
  }
  return x;
}

NumArray Network::backward(const NetworkCache& cache, const NumArray& grad_out,
                           NetworkGrads* grads) const {
  NumArray g = grad_out;
  for (std::size_t l = specs_.size(); l-- > 0;) {
    g = layer_backward(specs_[l], params_[l], cache.layers[l], g,
                       &grads->layers[l]);
  }
  return g;
}

NetworkGrads Network::zero_grads() const {
  NetworkGrads grads;
  grads.layers.resize(params_.size());
  for (std::size_t l = 0; l < params_.size(); ++l) {
    for (const auto& t : params_[l].tensors)
      grads.layers[l].push_back(NumArray::zeros_like(t));
  }
  return grads;
}

std::vector<NumArray*> Network::parameter_tensors() {
  std::vector<NumArray*> out;
  for (auto& p : params_)
    for (auto& t : p.tensors) out.push_back(&t);
  return out;
}

std::vector<const NumArray*> Network::parameter_tensors() const {
  std::vector<const NumArray*> out;
  for (const auto& p : params_)
    for (const auto& t : p.tensors) out.push_back(&t);
  return out;
}

std::vector<NumArray*> Network::grad_tensors(NetworkGrads& grads) {
  std::vector<NumArray*> out;
  for (auto& layer : grads.layers)
    for (auto& t : layer) out.push_back(&t);
  return out;
}

}  // namespace artrec::nn
