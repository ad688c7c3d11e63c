#include "dvk/cnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <spdlog/spdlog.h>

#include "dvk/error.hpp"

namespace dvk::cnn {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void check_data(const ArchitectureSpec& spec, const LabelledImages& data) {
  if (data.images.size() != data.labels.size()) throw DataError("training data: image / label count mismatch");
  if (data.images.empty()) throw DataError("training data: no images");
  if (spec.input.width != spec.input.height) throw DataError("training data: network input must be square");
  for (const RasterImage& img : data.images) {
    if (img.channels != spec.input.channels) throw DataError("training data: channel count does not match network");
  }
}

// Images prepared once per run: resized for random cropping, plus the
// deterministic centre crops used for evaluation.
struct Prepared {
  std::vector<RasterImage> base;
  std::vector<RasterImage> centre;
};

Prepared prepare(const ArchitectureSpec& spec, const LabelledImages& data, bool augment) {
  const int target = spec.input.width;
  Prepared p;
  p.centre.reserve(data.images.size());
  for (const RasterImage& img : data.images) p.centre.push_back(centre_crop(img, target));
  if (augment) {
    p.base.reserve(data.images.size());
    for (const RasterImage& img : data.images) p.base.push_back(resize_min_side(img, crop_base_side(target)));
  }
  return p;
}

struct BatchRun {
  LossKind loss;
  int batch_size;
  bool augment;
  double colour_jitter;
  const RgbPca* rgb_pca;
  kernels::Backend backend;
};

// One pass over the data in a seeded order; returns the mean batch loss.
double run_epoch(Network& state, const ArchitectureSpec& spec, const LabelledImages& data, const Prepared& prep,
                 const BatchRun& run, const SgdHyper& hyper, std::uint64_t seed) {
  const int n = static_cast<int>(data.images.size());
  const int target = spec.input.width;
  const int scores_at = spec.score_layer();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  state.mode = Mode::kTrain;
  double total = 0;
  int batches = 0;
  for (int start = 0; start < n; start += run.batch_size) {
    const int end = std::min(n, start + run.batch_size);
    std::vector<RasterImage> images;
    std::vector<std::vector<int>> labels;
    for (int k = start; k < end; ++k) {
      const int i = order[k];
      const std::uint64_t sample_seed = mix(seed, static_cast<std::uint64_t>(k));
      RasterImage img = run.augment ? random_train_crop(prep.base[i], target, sample_seed).image : prep.centre[i];
      if (run.colour_jitter > 0 && run.rgb_pca) {
        img = colour_jitter(img, *run.rgb_pca, run.colour_jitter, mix(sample_seed, 1));
      }
      images.push_back(std::move(img));
      labels.push_back(data.labels[i]);
    }
    const Tensor<float> batch = to_tensor(images, state, spec.input);
    const std::uint64_t batch_seed = mix(seed, 0x100000000ULL + static_cast<std::uint64_t>(start));
    const Activations<float> acts = forward(state, spec, batch, batch_seed, run.backend, scores_at);
    const Tensor<float>& out = acts.outputs[scores_at];
    const std::vector<double> scores(out.data.begin(), out.data.end());
    const LossResult loss = compute_loss(run.loss, scores, out.c, labels);
    if (!std::isfinite(loss.value)) throw NumericalError("training diverged: non-finite loss");
    Tensor<float> dout(out.n, out.shape());
    std::transform(loss.gradient.begin(), loss.gradient.end(), dout.data.begin(),
                   [](double g) { return static_cast<float>(g); });
    const Gradients<float> grads = backward(state, spec, acts, scores_at, dout, false, run.backend);
    sgd_step(state, grads, hyper);
    total += loss.value;
    ++batches;
  }
  state.mode = Mode::kEval;
  return total / std::max(1, batches);
}

}  // namespace

RasterImage centre_crop(const RasterImage& image, int target) {
  return generate_samples(image, AugmentKind::kNone, target, true).front();
}

double top1_accuracy(const std::vector<double>& scores, int num_classes, const std::vector<std::vector<int>>& labels) {
  if (labels.empty()) return 0.0;
  if (scores.size() != labels.size() * static_cast<std::size_t>(num_classes)) {
    throw DataError("top1_accuracy: shape mismatch");
  }
  int hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = scores.begin() + static_cast<std::ptrdiff_t>(i * num_classes);
    const int best = static_cast<int>(std::max_element(row, row + num_classes) - row);
    if (std::find(labels[i].begin(), labels[i].end(), best) != labels[i].end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<double> predict_scores(const Network& state, const ArchitectureSpec& spec,
                                   const std::vector<RasterImage>& images, kernels::Backend backend) {
  if (state.mode != Mode::kEval) throw DataError("predict_scores: network must be in eval mode");
  const int scores_at = spec.score_layer();
  const int nc = spec.layers[scores_at].out_dim;
  std::vector<double> out;
  out.reserve(images.size() * nc);
  constexpr std::size_t kBatch = 64;
  for (std::size_t start = 0; start < images.size(); start += kBatch) {
    const std::vector<RasterImage> chunk(images.begin() + start,
                                         images.begin() + std::min(images.size(), start + kBatch));
    const auto acts = forward(state, spec, to_tensor(chunk, state, spec.input), 0, backend, scores_at);
    out.insert(out.end(), acts.outputs[scores_at].data.begin(), acts.outputs[scores_at].data.end());
  }
  return out;
}

std::vector<FeatureVector> extract_features(const Network& state, const ArchitectureSpec& spec,
                                            const std::vector<RasterImage>& images, bool l2_normalise,
                                            kernels::Backend backend) {
  if (state.mode != Mode::kEval) throw DataError("extract_features: network must be in eval mode");
  const int at = spec.feature_layer();
  std::vector<FeatureVector> out;
  out.reserve(images.size());
  constexpr std::size_t kBatch = 64;
  for (std::size_t start = 0; start < images.size(); start += kBatch) {
    const std::vector<RasterImage> chunk(images.begin() + start,
                                         images.begin() + std::min(images.size(), start + kBatch));
    const auto acts = forward(state, spec, to_tensor(chunk, state, spec.input), 0, backend, at);
    const Tensor<float>& f = acts.outputs[at];
    for (int b = 0; b < f.n; ++b) {
      FeatureVector v;
      const auto s = f.sample(b);
      v.values.assign(s.begin(), s.end());
      v.provenance = "cnn:" + spec.name;
      if (l2_normalise) {
        dvk::l2_normalise(v.values);
        v.l2_normalised = true;
      }
      out.push_back(std::move(v));
    }
  }
  return out;
}

TrainReport train_network(Network& state, const ArchitectureSpec& spec, const LabelledImages& data,
                          const TrainOptions& options) {
  check_data(spec, data);
  if (!state.matches(spec)) throw DataError("train_network: state does not match " + spec.name);
  if (options.batch_size < 1 || options.epochs < 0) throw DataError("train_network: invalid batch size or epochs");
  if (!options.layer_rate_scale.empty() && options.layer_rate_scale.size() != spec.layers.size()) {
    throw DataError("train_network: layer_rate_scale must have one entry per layer");
  }
  if (options.set_input_mean) {
    if (options.input_scale > 0) {
      state.input_scale = options.input_scale;
    } else {
      const double sd = pixel_std(data.images);
      state.input_scale = sd > 0 ? 1.0 / sd : 1.0;
    }
    const std::vector<double> mean = channel_means(data.images, spec.input.channels);
    state.input_mean.clear();
    for (double m : mean) state.input_mean.push_back(static_cast<float>(m * state.input_scale));
  }
  const Prepared prep = prepare(spec, data, options.augment);
  RgbPca pca;
  if (options.colour_jitter > 0) pca = compute_rgb_pca(data.images, 1u << 20, options.seed);
  std::vector<RasterImage> val_centre;
  if (options.validation) {
    for (const RasterImage& img : options.validation->images) val_centre.push_back(centre_crop(img, spec.input.width));
  }

  state.schedule = PlateauSchedule{};
  state.schedule.learning_rate = options.learning_rate;
  state.schedule.patience = options.patience;
  const BatchRun run{options.loss, options.batch_size, options.augment, options.colour_jitter,
                     options.colour_jitter > 0 ? &pca : nullptr, options.backend};
  const int nc = spec.layers[spec.score_layer()].out_dim;

  TrainReport report;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    SgdHyper hyper{state.schedule.learning_rate, options.momentum, options.weight_decay, {}};
    if (!options.layer_rate_scale.empty()) {
      for (double s : options.layer_rate_scale) hyper.layer_rate.push_back(s * state.schedule.learning_rate);
    }
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.learning_rate = state.schedule.learning_rate;
    stats.train_loss = run_epoch(state, spec, data, prep, run, hyper, mix(options.seed, epoch));
    stats.train_accuracy = top1_accuracy(predict_scores(state, spec, prep.centre, options.backend), nc, data.labels);
    if (options.validation) {
      stats.validation_error =
          1.0 - top1_accuracy(predict_scores(state, spec, val_centre, options.backend), nc, options.validation->labels);
    } else {
      stats.validation_error = stats.train_loss;
    }
    if (state.schedule.observe(stats.validation_error)) {
      spdlog::info("{}: learning rate lowered to {:g} after epoch {}", spec.name, state.schedule.learning_rate,
                   stats.epoch);
    }
    report.epochs.push_back(stats);
    if (options.on_epoch) options.on_epoch(stats);
    if (stats.train_accuracy >= options.stop_at_train_accuracy) break;
  }
  state.mode = Mode::kEval;
  return report;
}

std::vector<FineTuneStage> default_fine_tune_schedule(int epochs_per_stage) {
  return {{1e-2, 1e-4, epochs_per_stage},
          {1e-3, 1e-4, epochs_per_stage},
          {1e-4, 1e-4, epochs_per_stage},
          {1e-5, 1e-5, epochs_per_stage}};
}

FineTuneResult fine_tune(const Network& state, const ArchitectureSpec& spec, const LabelledImages& data,
                         int num_classes, const FineTuneOptions& options) {
  if (!state.matches(spec)) throw DataError("fine_tune: state does not match " + spec.name);
  if (options.stages.empty()) throw DataError("fine_tune: empty schedule");
  FineTuneResult result;
  result.spec = with_num_classes(spec, num_classes);
  check_data(result.spec, data);

  const int last = result.spec.score_layer();
  const Network fresh = init_network<float>(result.spec, mix(options.seed, 0xF1), options.init_std);
  result.state = state;
  result.state.layers[last] = fresh.layers[last];
  for (auto& p : result.state.layers) {
    std::fill(p.weight_momentum.begin(), p.weight_momentum.end(), 0.0f);
    std::fill(p.bias_momentum.begin(), p.bias_momentum.end(), 0.0f);
  }
  result.state.mode = Mode::kEval;

  const Prepared prep = prepare(result.spec, data, options.augment);
  const BatchRun run{options.loss, options.batch_size, options.augment, 0.0, nullptr, options.backend};
  const auto objective = [&] {
    const std::vector<double> s = predict_scores(result.state, result.spec, prep.centre, options.backend);
    return compute_loss(options.loss, s, num_classes, data.labels).value;
  };

  int epoch = 0;
  for (const FineTuneStage& stage : options.stages) {
    SgdHyper hyper{stage.hidden_rate, options.momentum, options.weight_decay, {}};
    hyper.layer_rate.assign(result.spec.layers.size(), stage.hidden_rate);
    hyper.layer_rate[last] = stage.last_rate;
    std::vector<double> trace{objective()};
    for (int e = 0; e < stage.epochs; ++e, ++epoch) {
      run_epoch(result.state, result.spec, data, prep, run, hyper, mix(options.seed, epoch));
      trace.push_back(objective());
    }
    result.stage_objective.push_back(std::move(trace));
  }
  result.state.mode = Mode::kEval;
  return result;
}

LowDimNetwork derive_low_dim_network(const Network& state, const ArchitectureSpec& spec, int feature_dim,
                                     std::uint64_t seed, double init_std) {
  if (feature_dim < 1) throw DataError("derive_low_dim_network: feature_dim must be >= 1");
  if (!state.matches(spec)) throw DataError("derive_low_dim_network: state does not match " + spec.name);
  const int scores_at = spec.score_layer();
  int penultimate = -1;
  for (int i = scores_at - 1; i >= 0; --i) {
    if (spec.layers[i].kind == LayerKind::kFullyConnected) {
      penultimate = i;
      break;
    }
  }
  if (penultimate < 0) throw DataError("derive_low_dim_network: no penultimate fully connected layer");

  LowDimNetwork out;
  out.spec = spec;
  out.spec.layers[penultimate].out_dim = feature_dim;
  out.spec.name = spec.name + "-" + std::to_string(feature_dim);
  const Network fresh = init_network<float>(out.spec, seed, init_std);
  out.state = state;
  out.state.layers[penultimate] = fresh.layers[penultimate];
  out.state.layers[scores_at] = fresh.layers[scores_at];
  for (auto& p : out.state.layers) {
    std::fill(p.weight_momentum.begin(), p.weight_momentum.end(), 0.0f);
    std::fill(p.bias_momentum.begin(), p.bias_momentum.end(), 0.0f);
  }
  out.layer_rate_scale.assign(out.spec.layers.size(), 0.1);
  out.layer_rate_scale[penultimate] = 1.0;
  out.layer_rate_scale[scores_at] = 1.0;
  return out;
}

}  // namespace dvk::cnn
