#pragma once

#include <cstdint>
#include <vector>

#include "dvk/cnn/architecture.hpp"
#include "dvk/cnn/tensor.hpp"
#include "dvk/image.hpp"
#include "dvk/kernels.hpp"

namespace dvk::cnn {

enum class Mode { kTrain, kEval };

template <typename Real>
struct LayerParams {
  std::vector<Real> weights;
  std::vector<Real> bias;
  std::vector<Real> weight_momentum;
  std::vector<Real> bias_momentum;
};

// Learning rate drops by `factor` once the validation error has failed to
// improve for `patience` consecutive epochs.
struct PlateauSchedule {
  double learning_rate = 1e-2;
  double factor = 10.0;
  int patience = 2;
  double best_error = 0.0;
  int bad_epochs = 0;
  int drops = 0;
  int max_drops = 3;
  bool started = false;

  /// Returns true when the rate was lowered.
  bool observe(double validation_error);
};

template <typename Real>
struct NetworkState {
  std::vector<LayerParams<Real>> layers;  // one entry per LayerSpec, empty for weightless layers
  Mode mode = Mode::kTrain;
  PlateauSchedule schedule;
  double input_scale = 255.0;    // image values are multiplied by this before mean subtraction
  std::vector<Real> input_mean;  // per input channel, in scaled units

  bool matches(const ArchitectureSpec& spec) const;
};

template <typename Real>
struct Activations {
  Tensor<Real> input;
  std::vector<Tensor<Real>> outputs;           // outputs[i] = output of layer i
  std::vector<std::vector<Real>> lrn_scale;    // per layer, LRN only
  std::vector<std::vector<int>> pool_argmax;   // per layer, max-pool only
  std::vector<std::vector<Real>> drop_mask;    // per layer, train-mode dropout only
};

template <typename Real>
struct Gradients {
  std::vector<std::vector<Real>> weights;  // per layer, empty for weightless layers
  std::vector<std::vector<Real>> bias;
  Tensor<Real> input;  // filled only when requested
};

struct SgdHyper {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<double> layer_rate;  // optional per-layer override of learning_rate
};

/// Weights ~ N(0, std^2) (default variance 1e-2), biases 0, train mode.
template <typename Real>
NetworkState<Real> init_network(const ArchitectureSpec& spec, std::uint64_t seed, double weight_std = 0.1);

// Runs every layer. Dropout masks derive from `seed`, so results are fixed
// by (state, batch, seed). `stop_after` < 0 runs to the end.
template <typename Real>
Activations<Real> forward(const NetworkState<Real>& state, const ArchitectureSpec& spec, const Tensor<Real>& batch,
                          std::uint64_t seed, kernels::Backend backend = kernels::Backend::kOpenMP,
                          int stop_after = -1);

// Back-propagates `dout`, the loss gradient with respect to outputs[from_layer].
template <typename Real>
Gradients<Real> backward(const NetworkState<Real>& state, const ArchitectureSpec& spec, const Activations<Real>& acts,
                         int from_layer, const Tensor<Real>& dout, bool want_input_gradient = false,
                         kernels::Backend backend = kernels::Backend::kOpenMP);

// v <- m v - lr (g + wd w); w <- w + v. Throws NumericalError and leaves the
// state untouched if any gradient is non-finite.
template <typename Real>
void sgd_step(NetworkState<Real>& state, const Gradients<Real>& grads, const SgdHyper& hyper);

// Packs images (already target-sized) into a batch, subtracting input_mean.
template <typename Real>
Tensor<Real> to_tensor(const std::vector<RasterImage>& images, const NetworkState<Real>& state,
                       const TensorShape& input);

std::vector<double> channel_means(const std::vector<RasterImage>& images, int channels);
double pixel_std(const std::vector<RasterImage>& images);

}  // namespace dvk::cnn
