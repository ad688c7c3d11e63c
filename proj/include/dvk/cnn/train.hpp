#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dvk/augment.hpp"
#include "dvk/cnn/loss.hpp"
#include "dvk/cnn/network.hpp"
#include "dvk/fisher.hpp"

namespace dvk::cnn {

// Training runs in single precision; gradient checks use NetworkState<double>.
using Network = NetworkState<float>;

struct LabelledImages {
  std::vector<RasterImage> images;
  std::vector<std::vector<int>> labels;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;       // mean mini-batch loss
  double train_accuracy = 0.0;   // eval mode, centre crops
  double validation_error = 0.0; // top-1, or the training loss without a validation set
  double learning_rate = 0.0;
};

struct TrainOptions {
  int epochs = 30;
  int batch_size = 32;
  LossKind loss = LossKind::kSoftmaxCe;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int patience = 2;
  std::vector<double> layer_rate_scale;  // optional per-layer multiplier of the scheduled rate
  bool augment = true;                   // random crops of the crop_base_side image, random mirror
  double colour_jitter = 0.0;            // RGB PCA jitter strength, 0 disables
  bool set_input_mean = true;
  double input_scale = 255.0;            // <= 0 picks 1 / pixel standard deviation
  double stop_at_train_accuracy = 2.0;   // > 1 never stops early
  std::uint64_t seed = 0;
  kernels::Backend backend = kernels::Backend::kOpenMP;
  const LabelledImages* validation = nullptr;
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
};

/// Mini-batch SGD with momentum; returns in eval mode.
TrainReport train_network(Network& state, const ArchitectureSpec& spec, const LabelledImages& data,
                          const TrainOptions& options);

struct FineTuneStage {
  double last_rate = 1e-2;
  double hidden_rate = 1e-4;
  int epochs = 1;
};

/// 1e-2/1e-4, 1e-3/1e-4, 1e-4/1e-4, 1e-5/1e-5 (last layer / hidden layers).
std::vector<FineTuneStage> default_fine_tune_schedule(int epochs_per_stage);

struct FineTuneOptions {
  LossKind loss = LossKind::kSoftmaxCe;
  std::vector<FineTuneStage> stages = default_fine_tune_schedule(1);
  int batch_size = 32;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool augment = true;
  double init_std = 0.1;
  std::uint64_t seed = 0;
  kernels::Backend backend = kernels::Backend::kOpenMP;
};

struct FineTuneResult {
  ArchitectureSpec spec;
  Network state;
  // Per stage: the full-set objective (eval mode, centre crops) before the
  // stage and after each of its epochs.
  std::vector<std::vector<double>> stage_objective;
};

// Replaces the score layer by a freshly initialised one with `num_classes`
// outputs and trains the two rate groups through the staged schedule.
FineTuneResult fine_tune(const Network& state, const ArchitectureSpec& spec, const LabelledImages& data,
                         int num_classes, const FineTuneOptions& options);

struct LowDimNetwork {
  ArchitectureSpec spec;
  Network state;
  std::vector<double> layer_rate_scale;  // 0.1 for copied layers, 1 for the new full7 / full8
};

// Copies every layer of a trained network except the penultimate fully
// connected layer (resized to `feature_dim`) and the score layer, which are
// re-initialised. Training it with learning rate 1e-2 and the returned scales
// gives 1e-3 for copied layers.
LowDimNetwork derive_low_dim_network(const Network& state, const ArchitectureSpec& spec, int feature_dim,
                                     std::uint64_t seed, double init_std = 0.1);

// Output of the ReLU after the penultimate fully connected layer, one vector
// per image (images must already match the input size). Requires eval mode.
std::vector<FeatureVector> extract_features(const Network& state, const ArchitectureSpec& spec,
                                            const std::vector<RasterImage>& images, bool l2_normalise = true,
                                            kernels::Backend backend = kernels::Backend::kOpenMP);

/// Class scores (score layer, before softmax), N x num_classes, eval mode.
std::vector<double> predict_scores(const Network& state, const ArchitectureSpec& spec,
                                   const std::vector<RasterImage>& images,
                                   kernels::Backend backend = kernels::Backend::kOpenMP);

/// Resize so the smaller side is `target`, then take the centre target x target crop.
RasterImage centre_crop(const RasterImage& image, int target);

/// Fraction of samples whose arg-max class is one of their labels.
double top1_accuracy(const std::vector<double>& scores, int num_classes, const std::vector<std::vector<int>>& labels);

}  // namespace dvk::cnn
