#include "artrec/nn/layers.hpp"

#include <cmath>
#include <string>

namespace artrec::nn {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check(bool ok, const char* what) {
  if (!ok) throw InvalidParameterError(std::string("layer: ") + what);
}

NumArray uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
  NumArray a(std::move(shape));
  const double bound = std::sqrt(1.0 / std::max(1, fan_in));
  a.fill_uniform(rng, -bound, bound);
  return a;
}

}  // namespace

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv1d: return "conv1d";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kLeakyRelu: return "leaky_relu";
    case LayerKind::kSoftmax: return "softmax";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kBiRnn: return "birnn";
    case LayerKind::kMeanPool: return "mean_pool";
  }
  return "dense";
}

LayerKind layer_kind_from_name(const std::string& name) {
  if (name == "dense") return LayerKind::kDense;
  if (name == "conv1d") return LayerKind::kConv1d;
  if (name == "batchnorm") return LayerKind::kBatchNorm;
  if (name == "leaky_relu") return LayerKind::kLeakyRelu;
  if (name == "softmax") return LayerKind::kSoftmax;
  if (name == "sigmoid") return LayerKind::kSigmoid;
  if (name == "birnn") return LayerKind::kBiRnn;
  if (name == "mean_pool") return LayerKind::kMeanPool;
  throw SchemaError("unknown layer kind: " + name);
}

LayerParams init_layer_params(const LayerSpec& spec, Rng& rng) {
  LayerParams p;
  switch (spec.kind) {
    case LayerKind::kDense: {
      check(spec.in_features > 0 && spec.out_features > 0, "dense sizes");
      p.tensors.push_back(uniform_init({spec.out_features, spec.in_features},
                                       spec.in_features, rng));
      p.tensors.push_back(NumArray({spec.out_features}));
      break;
    }
    case LayerKind::kConv1d: {
      check(spec.in_channels > 0 && spec.out_channels > 0, "conv channels");
      check(spec.kernel >= 1 && spec.kernel % 2 == 1, "conv kernel must be odd");
      p.tensors.push_back(uniform_init(
          {spec.out_channels, spec.in_channels, spec.kernel},
          spec.in_channels * spec.kernel, rng));
      p.tensors.push_back(NumArray({spec.out_channels}));
      break;
    }
    case LayerKind::kBatchNorm: {
      check(spec.features > 0, "batchnorm features");
      NumArray gamma({spec.features});
      gamma.fill(1.0);
      p.tensors.push_back(std::move(gamma));
      p.tensors.push_back(NumArray({spec.features}));  // beta
      p.state.push_back(NumArray({spec.features}));    // running mean
      NumArray rv({spec.features});
      rv.fill(1.0);
      p.state.push_back(std::move(rv));  // running var
      break;
    }
    case LayerKind::kBiRnn: {
      check(spec.input_size > 0 && spec.hidden_size > 0, "birnn sizes");
      const int c = spec.input_size;
      const int h = spec.hidden_size;
      for (int dir = 0; dir < 2; ++dir) {
        for (int gate = 0; gate < 3; ++gate) {  // update, reset, candidate
          p.tensors.push_back(uniform_init({h, c}, c, rng));  // W
          p.tensors.push_back(uniform_init({h, h}, h, rng));  // U
          p.tensors.push_back(NumArray({h}));                 // b
        }
      }
      break;
    }
    case LayerKind::kLeakyRelu:
    case LayerKind::kSoftmax:
    case LayerKind::kSigmoid:
    case LayerKind::kMeanPool:
      break;
  }
  return p;
}

namespace {

NumArray dense_forward(const LayerSpec& spec, const LayerParams& params,
                       const NumArray& input, LayerCache* cache) {
  check(static_cast<int>(input.size()) == spec.in_features, "dense input size");
  const auto& w = params.tensors[0];
  const auto& b = params.tensors[1];
  NumArray out({spec.out_features});
  for (int o = 0; o < spec.out_features; ++o) {
    double acc = b[o];
    const double* wrow = w.data() + static_cast<std::size_t>(o) * spec.in_features;
    for (int i = 0; i < spec.in_features; ++i) acc += wrow[i] * input[i];
    out[o] = acc;
  }
  if (cache) cache->saved = {input};
  return out;
}

NumArray dense_backward(const LayerSpec& spec, const LayerParams& params,
                        const LayerCache& cache, const NumArray& grad_out,
                        std::vector<NumArray>* grads) {
  const auto& input = cache.saved[0];
  const auto& w = params.tensors[0];
  NumArray din(std::vector<int>(cache.in_shape));
  auto& dw = (*grads)[0];
  auto& db = (*grads)[1];
  for (int o = 0; o < spec.out_features; ++o) {
    const double g = grad_out[o];
    db[o] += g;
    double* dwrow = dw.data() + static_cast<std::size_t>(o) * spec.in_features;
    const double* wrow = w.data() + static_cast<std::size_t>(o) * spec.in_features;
    for (int i = 0; i < spec.in_features; ++i) {
      dwrow[i] += g * input[i];
      din[i] += g * wrow[i];
    }
  }
  return din;
}

NumArray conv1d_forward(const LayerSpec& spec, const LayerParams& params,
                        const NumArray& input, LayerCache* cache) {
  check(input.shape().size() == 2 && input.shape()[0] == spec.in_channels,
        "conv1d input shape");
  const int length = input.shape()[1];
  const int pad = (spec.kernel - 1) / 2;
  const auto& w = params.tensors[0];
  const auto& b = params.tensors[1];
  NumArray out({spec.out_channels, length});
  for (int co = 0; co < spec.out_channels; ++co) {
    for (int l = 0; l < length; ++l) {
      double acc = b[co];
      for (int ci = 0; ci < spec.in_channels; ++ci) {
        const double* in_row = input.data() + static_cast<std::size_t>(ci) * length;
        const double* w_row = w.data() + (static_cast<std::size_t>(co) * spec.in_channels + ci) * spec.kernel;
        for (int k = 0; k < spec.kernel; ++k) {
          const int src = l + k - pad;
          if (src < 0 || src >= length) continue;
          acc += w_row[k] * in_row[src];
        }
      }
      out.data()[static_cast<std::size_t>(co) * length + l] = acc;
    }
  }
  if (cache) cache->saved = {input};
  return out;
}

NumArray conv1d_backward(const LayerSpec& spec, const LayerParams& params,
                         const LayerCache& cache, const NumArray& grad_out,
                         std::vector<NumArray>* grads) {
  const auto& input = cache.saved[0];
  const int length = input.shape()[1];
  const int pad = (spec.kernel - 1) / 2;
  const auto& w = params.tensors[0];
  NumArray din(std::vector<int>(cache.in_shape));
  auto& dw = (*grads)[0];
  auto& db = (*grads)[1];
  for (int co = 0; co < spec.out_channels; ++co) {
    const double* g_row = grad_out.data() + static_cast<std::size_t>(co) * length;
    for (int l = 0; l < length; ++l) db[co] += g_row[l];
    for (int ci = 0; ci < spec.in_channels; ++ci) {
      const double* in_row = input.data() + static_cast<std::size_t>(ci) * length;
      double* din_row = din.data() + static_cast<std::size_t>(ci) * length;
      const std::size_t w_base = (static_cast<std::size_t>(co) * spec.in_channels + ci) * spec.kernel;
      for (int k = 0; k < spec.kernel; ++k) {
        const double wv = w[w_base + k];
        double dw_acc = 0.0;
        for (int l = 0; l < length; ++l) {
          const int src = l + k - pad;
          if (src < 0 || src >= length) continue;
          dw_acc += g_row[l] * in_row[src];
          din_row[src] += g_row[l] * wv;
        }
        dw[w_base + k] += dw_acc;
      }
    }
  }
  return din;
}

NumArray batchnorm_forward(const LayerSpec& spec, LayerParams& params,
                           const NumArray& input, bool training,
                           LayerCache* cache) {
  check(input.shape().size() == 2 && input.shape()[0] == spec.features,
        "batchnorm input shape");
  const int length = input.shape()[1];
  const auto& gamma = params.tensors[0];
  const auto& beta = params.tensors[1];
  auto& running_mean = params.state[0];
  auto& running_var = params.state[1];

  NumArray out({spec.features, length});
  NumArray xhat({spec.features, length});
  NumArray mean({spec.features});
  NumArray var({spec.features});

  for (int c = 0; c < spec.features; ++c) {
    const double* row = input.data() + static_cast<std::size_t>(c) * length;
    double m, v;
    if (training) {
      m = 0.0;
      for (int l = 0; l < length; ++l) m += row[l];
      m /= length;
      v = 0.0;
      for (int l = 0; l < length; ++l) v += (row[l] - m) * (row[l] - m);
      v /= length;
      running_mean[c] = (1.0 - kBnMomentum) * running_mean[c] + kBnMomentum * m;
      running_var[c] = (1.0 - kBnMomentum) * running_var[c] + kBnMomentum * v;
    } else {
      m = running_mean[c];
      v = running_var[c];
    }
    mean[c] = m;
    var[c] = v;
    const double inv = 1.0 / std::sqrt(v + kBnEps);
    double* xh_row = xhat.data() + static_cast<std::size_t>(c) * length;
    double* out_row = out.data() + static_cast<std::size_t>(c) * length;
    for (int l = 0; l < length; ++l) {
      xh_row[l] = (row[l] - m) * inv;
      out_row[l] = gamma[c] * xh_row[l] + beta[c];
    }
  }
  if (cache) cache->saved = {xhat, var};
  return out;
}

NumArray batchnorm_backward(const LayerSpec& spec, const LayerParams& params,
                            const LayerCache& cache, const NumArray& grad_out,
                            std::vector<NumArray>* grads) {
  const auto& xhat = cache.saved[0];
  const auto& var = cache.saved[1];
  const int length = cache.in_shape[1];
  const auto& gamma = params.tensors[0];
  NumArray din(std::vector<int>(cache.in_shape));
  auto& dgamma = (*grads)[0];
  auto& dbeta = (*grads)[1];

  for (int c = 0; c < spec.features; ++c) {
    const double* g_row = grad_out.data() + static_cast<std::size_t>(c) * length;
    const double* xh_row = xhat.data() + static_cast<std::size_t>(c) * length;
    double* din_row = din.data() + static_cast<std::size_t>(c) * length;
    const double inv = 1.0 / std::sqrt(var[c] + kBnEps);
    double sum_g = 0.0, sum_gx = 0.0;
    for (int l = 0; l < length; ++l) {
      sum_g += g_row[l];
      sum_gx += g_row[l] * xh_row[l];
    }
    dgamma[c] += sum_gx;
    dbeta[c] += sum_g;
    if (cache.training) {
      const double mean_g = sum_g / length;
      const double mean_gx = sum_gx / length;
      for (int l = 0; l < length; ++l) {
        din_row[l] = gamma[c] * inv * (g_row[l] - mean_g - xh_row[l] * mean_gx);
      }
    } else {
      for (int l = 0; l < length; ++l) din_row[l] = gamma[c] * inv * g_row[l];
    }
  }
  return din;
}

NumArray leaky_relu_forward(const LayerSpec& spec, const NumArray& input,
                            LayerCache* cache) {
  NumArray out = input;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] < 0.0) out[i] *= spec.slope;
  }
  if (cache) cache->saved = {input};
  return out;
}

NumArray leaky_relu_backward(const LayerSpec& spec, const LayerCache& cache,
                             const NumArray& grad_out) {
  const auto& input = cache.saved[0];
  NumArray din = grad_out;
  for (std::size_t i = 0; i < din.size(); ++i) {
    if (input[i] < 0.0) din[i] *= spec.slope;
  }
  return din;
}

NumArray softmax_forward(const NumArray& input, LayerCache* cache) {
  NumArray out = input;
  double mx = out[0];
  for (std::size_t i = 1; i < out.size(); ++i) mx = std::max(mx, out[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(out[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= sum;
  if (cache) cache->saved = {out};
  return out;
}

NumArray softmax_backward(const LayerCache& cache, const NumArray& grad_out) {
  const auto& y = cache.saved[0];
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += grad_out[i] * y[i];
  NumArray din(std::vector<int>(cache.in_shape));
  for (std::size_t i = 0; i < y.size(); ++i) din[i] = y[i] * (grad_out[i] - dot);
  return din;
}

NumArray sigmoid_forward(const NumArray& input, LayerCache* cache) {
  NumArray out = input;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(out[i]);
  if (cache) cache->saved = {out};
  return out;
}

NumArray sigmoid_backward(const LayerCache& cache, const NumArray& grad_out) {
  const auto& y = cache.saved[0];
  NumArray din(std::vector<int>(cache.in_shape));
  for (std::size_t i = 0; i < y.size(); ++i)
    din[i] = grad_out[i] * y[i] * (1.0 - y[i]);
  return din;
}

NumArray mean_pool_forward(const NumArray& input, LayerCache* cache) {
  check(input.shape().size() == 2, "mean_pool input shape");
  const int channels = input.shape()[0];
  const int length = input.shape()[1];
  NumArray out({channels});
  for (int c = 0; c < channels; ++c) {
    const double* row = input.data() + static_cast<std::size_t>(c) * length;
    double acc = 0.0;
    for (int l = 0; l < length; ++l) acc += row[l];
    out[c] = acc / length;
  }
  if (cache) cache->saved = {};
  return out;
}

NumArray mean_pool_backward(const LayerCache& cache, const NumArray& grad_out) {
  const int channels = cache.in_shape[0];
  const int length = cache.in_shape[1];
  NumArray din(std::vector<int>(cache.in_shape));
  for (int c = 0; c < channels; ++c) {
    const double g = grad_out[c] / length;
    double* row = din.data() + static_cast<std::size_t>(c) * length;
    for (int l = 0; l < length; ++l) row[l] = g;
  }
  return din;
}

// Bidirectional gated recurrent layer. Parameter layout per direction:
// [Wz Uz bz, Wr Ur br, Wh Uh bh]; forward direction first.
struct GruDirCache {
  NumArray z, r, c, h;  // each {L, H}
};

void gru_direction_forward(const LayerSpec& spec, const LayerParams& params,
                           int dir, const NumArray& input, NumArray* out,
                           GruDirCache* cache) {
  const int c_in = spec.input_size;
  const int h_sz = spec.hidden_size;
  const int length = input.shape()[1];
  const int base = dir * 9;
  const auto& wz = params.tensors[base + 0];
  const auto& uz = params.tensors[base + 1];
  const auto& bz = params.tensors[base + 2];
  const auto& wr = params.tensors[base + 3];
  const auto& ur = params.tensors[base + 4];
  const auto& br = params.tensors[base + 5];
  const auto& wh = params.tensors[base + 6];
  const auto& uh = params.tensors[base + 7];
  const auto& bh = params.tensors[base + 8];

  cache->z = NumArray({length, h_sz});
  cache->r = NumArray({length, h_sz});
  cache->c = NumArray({length, h_sz});
  cache->h = NumArray({length, h_sz});

  std::vector<double> h_prev(h_sz, 0.0);
  std::vector<double> x(c_in);
  for (int step = 0; step < length; ++step) {
    const int t = dir == 0 ? step : length - 1 - step;
    for (int i = 0; i < c_in; ++i)
      x[i] = input[static_cast<std::size_t>(i) * length + t];

    double* zt = cache->z.data() + static_cast<std::size_t>(t) * h_sz;
    double* rt = cache->r.data() + static_cast<std::size_t>(t) * h_sz;
    double* ct = cache->c.data() + static_cast<std::size_t>(t) * h_sz;
    double* ht = cache->h.data() + static_cast<std::size_t>(t) * h_sz;

    for (int j = 0; j < h_sz; ++j) {
      double az = bz[j], ar = br[j];
      for (int i = 0; i < c_in; ++i) {
        az += wz[static_cast<std::size_t>(j) * c_in + i] * x[i];
        ar += wr[static_cast<std::size_t>(j) * c_in + i] * x[i];
      }
      for (int i = 0; i < h_sz; ++i) {
        az += uz[static_cast<std::size_t>(j) * h_sz + i] * h_prev[i];
        ar += ur[static_cast<std::size_t>(j) * h_sz + i] * h_prev[i];
      }
      zt[j] = sigmoid(az);
      rt[j] = sigmoid(ar);
    }
    for (int j = 0; j < h_sz; ++j) {
      double ac = bh[j];
      for (int i = 0; i < c_in; ++i)
        ac += wh[static_cast<std::size_t>(j) * c_in + i] * x[i];
      for (int i = 0; i < h_sz; ++i)
        ac += uh[static_cast<std::size_t>(j) * h_sz + i] * (rt[i] * h_prev[i]);
      ct[j] = std::tanh(ac);
      ht[j] = (1.0 - zt[j]) * h_prev[j] + zt[j] * ct[j];
    }
    for (int j = 0; j < h_sz; ++j) {
      h_prev[j] = ht[j];
      out->data()[(static_cast<std::size_t>(dir) * h_sz + j) * length + t] = ht[j];
    }
  }
}

void gru_direction_backward(const LayerSpec& spec, const LayerParams& params,
                            const NumArray& input, const GruDirCache& cache,
                            int dir, const NumArray& grad_out, NumArray* din,
                            std::vector<NumArray>* grads) {
  const int c_in = spec.input_size;
  const int h_sz = spec.hidden_size;
  const int length = input.shape()[1];
  const int base = dir * 9;
  const auto& wz = params.tensors[base + 0];
  const auto& uz = params.tensors[base + 1];
  const auto& wr = params.tensors[base + 3];
  const auto& ur = params.tensors[base + 4];
  const auto& wh = params.tensors[base + 6];
  const auto& uh = params.tensors[base + 7];
  auto& dwz = (*grads)[base + 0];
  auto& duz = (*grads)[base + 1];
  auto& dbz = (*grads)[base + 2];
  auto& dwr = (*grads)[base + 3];
  auto& dur = (*grads)[base + 4];
  auto& dbr = (*grads)[base + 5];
  auto& dwh = (*grads)[base + 6];
  auto& duh = (*grads)[base + 7];
  auto& dbh = (*grads)[base + 8];

  std::vector<double> dh_carry(h_sz, 0.0);
  std::vector<double> x(c_in);
  std::vector<double> dz(h_sz), dr(h_sz), dc(h_sz), drh(h_sz);

  for (int step = length - 1; step >= 0; --step) {
    const int t = dir == 0 ? step : length - 1 - step;
    const int t_prev = dir == 0 ? t - 1 : t + 1;
    const bool has_prev = dir == 0 ? t_prev >= 0 : t_prev < length;
    for (int i = 0; i < c_in; ++i)
      x[i] = input[static_cast<std::size_t>(i) * length + t];
    const double* zt = cache.z.data() + static_cast<std::size_t>(t) * h_sz;
    const double* rt = cache.r.data() + static_cast<std::size_t>(t) * h_sz;
    const double* ct = cache.c.data() + static_cast<std::size_t>(t) * h_sz;
    const double* h_prev =
        has_prev ? cache.h.data() + static_cast<std::size_t>(t_prev) * h_sz : nullptr;

    for (int j = 0; j < h_sz; ++j) {
      const double hp = h_prev ? h_prev[j] : 0.0;
      const double dht =
          grad_out[(static_cast<std::size_t>(dir) * h_sz + j) * length + t] +
          dh_carry[j];
      dz[j] = dht * (ct[j] - hp) * zt[j] * (1.0 - zt[j]);
      dc[j] = dht * zt[j] * (1.0 - ct[j] * ct[j]);
      dh_carry[j] = dht * (1.0 - zt[j]);
    }
    // d(r * h_prev) = Uh^T dc; then dr and the Uh gradient.
    for (int i = 0; i < h_sz; ++i) {
      double acc = 0.0;
      for (int j = 0; j < h_sz; ++j)
        acc += uh[static_cast<std::size_t>(j) * h_sz + i] * dc[j];
      drh[i] = acc;
    }
    for (int j = 0; j < h_sz; ++j) {
      const double hp = h_prev ? h_prev[j] : 0.0;
      dr[j] = drh[j] * hp * rt[j] * (1.0 - rt[j]);
      dh_carry[j] += drh[j] * rt[j];
    }
    for (int j = 0; j < h_sz; ++j) {
      dbz[j] += dz[j];
      dbr[j] += dr[j];
      dbh[j] += dc[j];
      for (int i = 0; i < c_in; ++i) {
        dwz[static_cast<std::size_t>(j) * c_in + i] += dz[j] * x[i];
        dwr[static_cast<std::size_t>(j) * c_in + i] += dr[j] * x[i];
        dwh[static_cast<std::size_t>(j) * c_in + i] += dc[j] * x[i];
      }
      if (h_prev) {
        for (int i = 0; i < h_sz; ++i) {
          duz[static_cast<std::size_t>(j) * h_sz + i] += dz[j] * h_prev[i];
          dur[static_cast<std::size_t>(j) * h_sz + i] += dr[j] * h_prev[i];
          duh[static_cast<std::size_t>(j) * h_sz + i] += dc[j] * (rt[i] * h_prev[i]);
        }
      }
    }
    for (int i = 0; i < c_in; ++i) {
      double acc = 0.0;
      for (int j = 0; j < h_sz; ++j) {
        acc += wz[static_cast<std::size_t>(j) * c_in + i] * dz[j];
        acc += wr[static_cast<std::size_t>(j) * c_in + i] * dr[j];
        acc += wh[static_cast<std::size_t>(j) * c_in + i] * dc[j];
      }
      din->data()[static_cast<std::size_t>(i) * length + t] += acc;
    }
    if (has_prev) {
      // Propagate through Uz and Ur into the previous hidden state.
      for (int i = 0; i < h_sz; ++i) {
        double acc = 0.0;
        for (int j = 0; j < h_sz; ++j) {
          acc += uz[static_cast<std::size_t>(j) * h_sz + i] * dz[j];
          acc += ur[static_cast<std::size_t>(j) * h_sz + i] * dr[j];
        }
        dh_carry[i] += acc;
      }
    }
  }
}

NumArray birnn_forward(const LayerSpec& spec, const LayerParams& params,
                       const NumArray& input, LayerCache* cache) {
  check(input.shape().size() == 2 && input.shape()[0] == spec.input_size,
        "birnn input shape");
  const int length = input.shape()[1];
  NumArray out({2 * spec.hidden_size, length});
  GruDirCache fwd, bwd;
  gru_direction_forward(spec, params, 0, input, &out, &fwd);
  gru_direction_forward(spec, params, 1, input, &out, &bwd);
  if (cache) {
    cache->saved = {input, fwd.z, fwd.r, fwd.c, fwd.h,
                    bwd.z, bwd.r, bwd.c, bwd.h};
  }
  return out;
}

NumArray birnn_backward(const LayerSpec& spec, const LayerParams& params,
                        const LayerCache& cache, const NumArray& grad_out,
                        std::vector<NumArray>* grads) {
  const auto& input = cache.saved[0];
  GruDirCache fwd{cache.saved[1], cache.saved[2], cache.saved[3], cache.saved[4]};
  GruDirCache bwd{cache.saved[5], cache.saved[6], cache.saved[7], cache.saved[8]};
  NumArray din(std::vector<int>(cache.in_shape));
  gru_direction_backward(spec, params, input, fwd, 0, grad_out, &din, grads);
  gru_direction_backward(spec, params, input, bwd, 1, grad_out, &din, grads);
  return din;
}

}  // namespace

NumArray layer_forward(const LayerSpec& spec, LayerParams& params,
                       const NumArray& input, bool training, LayerCache* cache) {
  if (cache) {
    cache->in_shape = input.shape();
    cache->training = training;
    cache->valid = true;
  }
  NumArray out;
  switch (spec.kind) {
    case LayerKind::kDense:
      out = dense_forward(spec, params, input, cache);
      break;
    case LayerKind::kConv1d:
      out = conv1d_forward(spec, params, input, cache);
      break;
    case LayerKind::kBatchNorm:
      out = batchnorm_forward(spec, params, input, training, cache);
      break;
    case LayerKind::kLeakyRelu:
      out = leaky_relu_forward(spec, input, cache);
      break;
    case LayerKind::kSoftmax:
      out = softmax_forward(input, cache);
      break;
    case LayerKind::kSigmoid:
      out = sigmoid_forward(input, cache);
      break;
    case LayerKind::kBiRnn:
      out = birnn_forward(spec, params, input, cache);
      break;
    case LayerKind::kMeanPool:
      out = mean_pool_forward(input, cache);
      break;
  }
  if (cache) cache->out_shape = out.shape();
  return out;
}

NumArray layer_backward(const LayerSpec& spec, const LayerParams& params,
                        const LayerCache& cache, const NumArray& grad_out,
                        std::vector<NumArray>* param_grads) {
  if (!cache.valid) throw InvalidParameterError("layer backward without forward cache");
  switch (spec.kind) {
    case LayerKind::kDense:
      return dense_backward(spec, params, cache, grad_out, param_grads);
    case LayerKind::kConv1d:
      return conv1d_backward(spec, params, cache, grad_out, param_grads);
    case LayerKind::kBatchNorm:
      return batchnorm_backward(spec, params, cache, grad_out, param_grads);
    case LayerKind::kLeakyRelu:
      return leaky_relu_backward(spec, cache, grad_out);
    case LayerKind::kSoftmax:
      return softmax_backward(cache, grad_out);
    case LayerKind::kSigmoid:
      return sigmoid_backward(cache, grad_out);
    case LayerKind::kBiRnn:
      return birnn_backward(spec, params, cache, grad_out, param_grads);
    case LayerKind::kMeanPool:
      return mean_pool_backward(cache, grad_out);
  }
  throw InvalidParameterError("unknown layer kind");
}

}  // namespace artrec::nn
