#pragma once

#include <vector>

#include "artrec/nn/array.hpp"

namespace artrec::nn {

enum class LayerKind {
  kDense,
  kConv1d,
  kBatchNorm,
  kLeakyRelu,
  kSoftmax,
  kSigmoid,
  kBiRnn,
  kMeanPool,
};

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

/// Hyperparameters of one layer. Sequence layers ({channels, length}
/// tensors) accept any length; dense layers fix both feature counts.
struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  int in_features = 0;    // dense
  int out_features = 0;   // dense
  int in_channels = 0;    // conv1d
  int out_channels = 0;   // conv1d
  int kernel = 3;         // conv1d, odd
  int features = 0;       // batchnorm channels
  double slope = 0.01;    // leaky-relu
  int input_size = 0;     // birnn
  int hidden_size = 0;    // birnn, per direction
};

/// Trainable tensors plus non-trainable state (batchnorm running stats).
struct LayerParams {
  std::vector<NumArray> tensors;
  std::vector<NumArray> state;
};

/// Values saved by a forward pass that the matching backward pass needs.
struct LayerCache {
  std::vector<NumArray> saved;
  std::vector<int> in_shape;
  std::vector<int> out_shape;
  bool training = false;
  bool valid = false;
};

/// Allocates and initializes parameters for a layer: fan-in-scaled
/// uniform weights, zero biases, unit batchnorm scale.
LayerParams init_layer_params(const LayerSpec& spec, Rng& rng);

NumArray layer_forward(const LayerSpec& spec, LayerParams& params,
                       const NumArray& input, bool training, LayerCache* cache);

/// Reverse-mode gradients. Accumulates parameter gradients into
/// `param_grads` (shaped like the layer tensors) and returns dL/dinput.
NumArray layer_backward(const LayerSpec& spec, const LayerParams& params,
                        const LayerCache& cache, const NumArray& grad_out,
                        std::vector<NumArray>* param_grads);

}  // namespace artrec::nn
