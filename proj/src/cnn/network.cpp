#include "dvk/cnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dvk/cnn/layers.hpp"
#include "dvk/error.hpp"

namespace dvk::cnn {

bool PlateauSchedule::observe(double validation_error) {
  if (!started || validation_error < best_error) {
    started = true;
    best_error = validation_error;
    bad_epochs = 0;
    return false;
  }
  if (++bad_epochs < patience || drops >= max_drops) return false;
  learning_rate /= factor;
  bad_epochs = 0;
  ++drops;
  return true;
}

template <typename Real>
bool NetworkState<Real>::matches(const ArchitectureSpec& spec) const {
  if (layers.size() != spec.layers.size()) return false;
  TensorShape cur = spec.input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const TensorShape next = output_shape(l, cur);
    std::size_t w = 0, b = 0;
    if (l.kind == LayerKind::kConv) {
      w = static_cast<std::size_t>(l.filters) * cur.channels * l.kernel * l.kernel;
      b = l.filters;
    } else if (l.kind == LayerKind::kFullyConnected) {
      w = static_cast<std::size_t>(l.out_dim) * cur.size();
      b = l.out_dim;
    }
    const LayerParams<Real>& p = layers[i];
    if (p.weights.size() != w || p.bias.size() != b) return false;
    if (p.weight_momentum.size() != w || p.bias_momentum.size() != b) return false;
    cur = next;
  }
  return true;
}

template <typename Real>
NetworkState<Real> init_network(const ArchitectureSpec& spec, std::uint64_t seed, double weight_std) {
  NetworkState<Real> state;
  state.layers.resize(spec.layers.size());
  state.mode = Mode::kTrain;
  state.input_mean.assign(spec.input.channels, Real(0));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, weight_std);
  TensorShape cur = spec.input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const TensorShape next = output_shape(l, cur);
    std::size_t w = 0, b = 0;
    if (l.kind == LayerKind::kConv) {
      w = static_cast<std::size_t>(l.filters) * cur.channels * l.kernel * l.kernel;
      b = l.filters;
    } else if (l.kind == LayerKind::kFullyConnected) {
      w = static_cast<std::size_t>(l.out_dim) * cur.size();
      b = l.out_dim;
    }
    LayerParams<Real>& p = state.layers[i];
    p.weights.resize(w);
    for (Real& v : p.weights) v = static_cast<Real>(gauss(rng));
    p.bias.assign(b, Real(0));
    p.weight_momentum.assign(w, Real(0));
    p.bias_momentum.assign(b, Real(0));
    cur = next;
  }
  return state;
}

namespace {

std::uint64_t layer_seed(std::uint64_t seed, std::size_t layer) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (layer + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

template <typename Real>
Activations<Real> forward(const NetworkState<Real>& state, const ArchitectureSpec& spec, const Tensor<Real>& batch,
                          std::uint64_t seed, kernels::Backend backend, int stop_after) {
  if (state.layers.size() != spec.layers.size()) {
    throw DataError("forward: state has " + std::to_string(state.layers.size()) + " layers, spec has " +
                    std::to_string(spec.layers.size()));
  }
  if (!(batch.shape() == spec.input)) {
    throw DataError("forward: input " + std::to_string(batch.h) + "x" + std::to_string(batch.w) + "x" +
                    std::to_string(batch.c) + " does not match " + spec.name + " input");
  }
  const int last = stop_after < 0 ? static_cast<int>(spec.layers.size()) - 1 : stop_after;
  Activations<Real> acts;
  acts.input = batch;
  acts.outputs.resize(last + 1);
  acts.lrn_scale.resize(last + 1);
  acts.pool_argmax.resize(last + 1);
  acts.drop_mask.resize(last + 1);
  for (int i = 0; i <= last; ++i) {
    const LayerSpec& l = spec.layers[i];
    const Tensor<Real>& in = i == 0 ? acts.input : acts.outputs[i - 1];
    Tensor<Real>& out = acts.outputs[i];
    const LayerParams<Real>& p = state.layers[i];
    const auto check = [&](std::size_t expected_weights) {
      if (p.weights.size() != expected_weights) {
        throw DataError("forward: layer '" + l.name + "' expects " + std::to_string(expected_weights) +
                        " weights, state has " + std::to_string(p.weights.size()));
      }
    };
    switch (l.kind) {
      case LayerKind::kConv:
        check(static_cast<std::size_t>(l.filters) * in.c * l.kernel * l.kernel);
        conv_forward<Real>(in, p.weights, p.bias, l, out, backend);
        break;
      case LayerKind::kFullyConnected:
        check(static_cast<std::size_t>(l.out_dim) * in.sample_size());
        fc_forward<Real>(in, p.weights, p.bias, l, out, backend);
        break;
      case LayerKind::kRelu:
        relu_forward(in, out);
        break;
      case LayerKind::kLrn:
        lrn_forward(in, l.lrn, out, acts.lrn_scale[i]);
        break;
      case LayerKind::kMaxPool:
        maxpool_forward(in, l, out, acts.pool_argmax[i]);
        break;
      case LayerKind::kDropout:
        dropout_forward(in, l.rate, state.mode == Mode::kTrain, layer_seed(seed, i), out, acts.drop_mask[i]);
        break;
      case LayerKind::kSoftmax:
        softmax_forward(in, out);
        break;
    }
  }
  return acts;
}

template <typename Real>
Gradients<Real> backward(const NetworkState<Real>& state, const ArchitectureSpec& spec, const Activations<Real>& acts,
                         int from_layer, const Tensor<Real>& dout, bool want_input_gradient,
                         kernels::Backend backend) {
  if (from_layer < 0 || from_layer >= static_cast<int>(acts.outputs.size())) {
    throw DataError("backward: layer index out of range of the recorded forward pass");
  }
  const Tensor<Real>& top = acts.outputs[from_layer];
  if (dout.data.size() != top.data.size()) {
    throw DataError("backward: gradient shape does not match output of '" + spec.layers[from_layer].name + "'");
  }
  Gradients<Real> grads;
  grads.weights.resize(spec.layers.size());
  grads.bias.resize(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    grads.weights[i].assign(state.layers[i].weights.size(), Real(0));
    grads.bias[i].assign(state.layers[i].bias.size(), Real(0));
  }

  // The lowest layer that needs an input gradient.
  int lowest = 0;
  if (!want_input_gradient) {
    while (lowest <= from_layer && !spec.layers[lowest].has_weights()) ++lowest;
  }

  Tensor<Real> g = dout, next;
  for (int i = from_layer; i >= lowest; --i) {
    const LayerSpec& l = spec.layers[i];
    const Tensor<Real>& in = i == 0 ? acts.input : acts.outputs[i - 1];
    const bool need_din = i > 0 || want_input_gradient;
    switch (l.kind) {
      case LayerKind::kConv:
        conv_backward<Real>(in, state.layers[i].weights, g, l, need_din ? &next : nullptr, grads.weights[i],
                            grads.bias[i], backend);
        break;
      case LayerKind::kFullyConnected:
        fc_backward<Real>(in, state.layers[i].weights, g, l, need_din ? &next : nullptr, grads.weights[i],
                          grads.bias[i], backend);
        break;
      case LayerKind::kRelu:
        relu_backward(in, g, next);
        break;
      case LayerKind::kLrn:
        lrn_backward(in, acts.lrn_scale[i], g, l.lrn, next);
        break;
      case LayerKind::kMaxPool:
        maxpool_backward(in, acts.pool_argmax[i], g, next);
        break;
      case LayerKind::kDropout:
        dropout_backward(acts.drop_mask[i], g, next);
        break;
      case LayerKind::kSoftmax:
        softmax_backward(acts.outputs[i], g, next);
        break;
    }
    if (!need_din) break;
    std::swap(g, next);
  }
  if (want_input_gradient) grads.input = std::move(g);
  return grads;
}

template <typename Real>
void sgd_step(NetworkState<Real>& state, const Gradients<Real>& grads, const SgdHyper& hyper) {
  if (grads.weights.size() != state.layers.size() || grads.bias.size() != state.layers.size()) {
    throw DataError("sgd_step: gradient layer count mismatch");
  }
  if (!hyper.layer_rate.empty() && hyper.layer_rate.size() != state.layers.size()) {
    throw DataError("sgd_step: per-layer rate count mismatch");
  }
  for (std::size_t i = 0; i < state.layers.size(); ++i) {
    if (grads.weights[i].size() != state.layers[i].weights.size() ||
        grads.bias[i].size() != state.layers[i].bias.size()) {
      throw DataError("sgd_step: gradient shape mismatch at layer " + std::to_string(i));
    }
    for (Real v : grads.weights[i]) {
      if (!std::isfinite(v)) throw NumericalError("sgd_step: non-finite gradient at layer " + std::to_string(i));
    }
    for (Real v : grads.bias[i]) {
      if (!std::isfinite(v)) throw NumericalError("sgd_step: non-finite gradient at layer " + std::to_string(i));
    }
  }
  const Real m = static_cast<Real>(hyper.momentum);
  const Real wd = static_cast<Real>(hyper.weight_decay);
  const auto update = [&](std::vector<Real>& w, std::vector<Real>& v, const std::vector<Real>& g, Real lr) {
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = m * v[j] - lr * (g[j] + wd * w[j]);
      w[j] += v[j];
    }
  };
  for (std::size_t i = 0; i < state.layers.size(); ++i) {
    const Real lr = static_cast<Real>(hyper.layer_rate.empty() ? hyper.learning_rate : hyper.layer_rate[i]);
    LayerParams<Real>& p = state.layers[i];
    update(p.weights, p.weight_momentum, grads.weights[i], lr);
    update(p.bias, p.bias_momentum, grads.bias[i], lr);
  }
}

double pixel_std(const std::vector<RasterImage>& images) {
  double sum = 0, sq = 0;
  std::size_t count = 0;
  for (const RasterImage& img : images) {
    for (double v : img.data) {
      sum += v;
      sq += v * v;
    }
    count += img.data.size();
  }
  if (count == 0) return 0.0;
  const double mean = sum / static_cast<double>(count);
  return std::sqrt(std::max(0.0, sq / static_cast<double>(count) - mean * mean));
}

std::vector<double> channel_means(const std::vector<RasterImage>& images, int channels) {
  std::vector<double> sum(channels, 0.0);
  std::size_t count = 0;
  for (const RasterImage& img : images) {
    if (img.channels != channels) throw DataError("channel_means: channel count mismatch");
    for (std::size_t px = 0; px < img.pixel_count(); ++px) {
      for (int c = 0; c < channels; ++c) sum[c] += img.data[px * channels + c];
    }
    count += img.pixel_count();
  }
  if (count > 0) {
    for (double& s : sum) s /= static_cast<double>(count);
  }
  return sum;
}

template <typename Real>
Tensor<Real> to_tensor(const std::vector<RasterImage>& images, const NetworkState<Real>& state,
                       const TensorShape& input) {
  Tensor<Real> t(static_cast<int>(images.size()), input);
  for (int b = 0; b < t.n; ++b) {
    const RasterImage& img = images[b];
    if (img.width != input.width || img.height != input.height || img.channels != input.channels) {
      throw DataError("to_tensor: image " + std::to_string(img.width) + "x" + std::to_string(img.height) + "x" +
                      std::to_string(img.channels) + " does not match network input");
    }
    for (int c = 0; c < t.c; ++c) {
      const Real mean = state.input_mean.empty() ? Real(0) : state.input_mean[c];
      for (int y = 0; y < t.h; ++y) {
        for (int x = 0; x < t.w; ++x) t.at(b, c, y, x) = static_cast<Real>(img.at(x, y, c) * state.input_scale) - mean;
      }
    }
  }
  return t;
}

#define DVK_INSTANTIATE(Real)                                                                                   \
  template struct NetworkState<Real>;                                                                           \
  template NetworkState<Real> init_network<Real>(const ArchitectureSpec&, std::uint64_t, double);               \
  template Activations<Real> forward<Real>(const NetworkState<Real>&, const ArchitectureSpec&,                  \
                                           const Tensor<Real>&, std::uint64_t, kernels::Backend, int);          \
  template Gradients<Real> backward<Real>(const NetworkState<Real>&, const ArchitectureSpec&,                   \
                                          const Activations<Real>&, int, const Tensor<Real>&, bool,             \
                                          kernels::Backend);                                                    \
  template void sgd_step<Real>(NetworkState<Real>&, const Gradients<Real>&, const SgdHyper&);                   \
  template Tensor<Real> to_tensor<Real>(const std::vector<RasterImage>&, const NetworkState<Real>&,             \
                                        const TensorShape&);

DVK_INSTANTIATE(float)
DVK_INSTANTIATE(double)

#undef DVK_INSTANTIATE

}  // namespace dvk::cnn
