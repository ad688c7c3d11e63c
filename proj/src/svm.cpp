#include "dvk/svm.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <spdlog/spdlog.h>

#include "dvk/error.hpp"

namespace dvk {

FeatureMatrix FeatureMatrix::from_features(const std::vector<FeatureVector>& features) {
  if (features.empty()) return {};
  FeatureMatrix m(static_cast<int>(features.size()), static_cast<int>(features.front().dim()));
  for (int i = 0; i < m.rows; ++i) {
    if (features[i].dim() != static_cast<std::size_t>(m.cols)) throw DataError("FeatureMatrix: mixed dimensions");
    std::copy(features[i].values.begin(), features[i].values.end(), m.row(i).begin());
  }
  return m;
}

namespace {

double dot(std::span<const double> a, const double* b) {
  double s = 0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

}  // namespace

BinarySvm train_binary_svm(const FeatureMatrix& x, std::span<const int> y, double c, const SvmOptions& options,
                           SvmTrace* trace, std::span<const bool> mask) {
  if (static_cast<int>(y.size()) != x.rows) throw DataError("train_binary_svm: label count mismatch");
  if (!(c > 0)) throw DataError("train_binary_svm: C must be positive");
  const int d = x.cols;

  std::vector<int> active;
  for (int i = 0; i < x.rows; ++i) {
    if (mask.empty() || mask[i]) active.push_back(i);
  }
  BinarySvm out;
  out.weights.assign(d, 0.0);
  if (active.empty()) return out;

  std::vector<double> alpha(x.rows, 0.0), qd(x.rows, 0.0);
  for (int i : active) {
    double s = 1.0;  // constant bias feature
    for (double v : x.row(i)) s += v * v;
    qd[i] = s;
  }
  std::vector<double>& w = out.weights;
  double& b = out.bias;
  std::mt19937_64 rng(options.seed);
  std::vector<int> order = active;

  auto squared_norm = [&] { return std::inner_product(w.begin(), w.end(), w.begin(), 0.0) + b * b; };

  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int i : order) {
      const double yi = y[i] > 0 ? 1.0 : -1.0;
      const double g = yi * (dot(x.row(i), w.data()) + b) - 1.0;
      double pg = g;
      if (alpha[i] == 0.0) pg = std::min(g, 0.0);
      else if (alpha[i] == c) pg = std::max(g, 0.0);
      if (std::abs(pg) <= 1e-15) continue;
      const double old = alpha[i];
      alpha[i] = std::clamp(old - g / qd[i], 0.0, c);
      const double step = (alpha[i] - old) * yi;
      if (step == 0.0) continue;
      const auto xi = x.row(i);
      for (int j = 0; j < d; ++j) w[j] += step * xi[j];
      b += step;
    }

    const double wnorm = squared_norm();
    double alpha_sum = 0, hinge = 0;
    for (int i : active) {
      alpha_sum += alpha[i];
      const double yi = y[i] > 0 ? 1.0 : -1.0;
      hinge += std::max(0.0, 1.0 - yi * (dot(x.row(i), w.data()) + b));
    }
    const double primal = 0.5 * wnorm + c * hinge;
    const double dual = alpha_sum - 0.5 * wnorm;
    if (!std::isfinite(primal)) throw NumericalError("train_binary_svm: non-finite objective");
    const double gap = primal - dual;
    if (trace) {
      trace->dual_objective.push_back(0.5 * wnorm - alpha_sum);
      trace->duality_gap.push_back(gap);
      trace->epochs = epoch + 1;
    }
    if (gap <= options.tol * std::abs(primal)) break;
  }
  return out;
}

LinearModel train_ovr(const FeatureMatrix& x, const std::vector<std::vector<int>>& labels,
                      const std::vector<std::string>& classes, double c, const SvmOptions& options,
                      const std::vector<std::vector<int>>* excluded) {
  if (static_cast<int>(labels.size()) != x.rows) throw DataError("train_ovr: label count mismatch");
  if (excluded && excluded->size() != labels.size()) throw DataError("train_ovr: exclusion list size mismatch");
  const int nc = static_cast<int>(classes.size());
  LinearModel model;
  model.feature_dim = x.cols;
  model.c = c;
  model.classes = classes;
  model.weights.assign(nc, std::vector<double>(x.cols, 0.0));
  model.bias.assign(nc, 0.0);
  model.trained.assign(nc, false);

  std::vector<char> has_positive(nc, 0);
  for (const auto& l : labels) {
    for (int cls : l) {
      if (cls < 0 || cls >= nc) throw DataError("train_ovr: label index out of range");
      has_positive[cls] = 1;
    }
  }
  for (int cls = 0; cls < nc; ++cls) {
    if (!has_positive[cls]) spdlog::warn("train_ovr: class '{}' has no positives, skipped", classes[cls]);
  }

#pragma omp parallel for schedule(dynamic)
  for (int cls = 0; cls < nc; ++cls) {
    if (!has_positive[cls]) continue;
    std::vector<int> y(x.rows);
    std::unique_ptr<bool[]> mask(new bool[x.rows]);
    for (int i = 0; i < x.rows; ++i) {
      y[i] = std::find(labels[i].begin(), labels[i].end(), cls) != labels[i].end() ? 1 : -1;
      mask[i] = !excluded || std::find((*excluded)[i].begin(), (*excluded)[i].end(), cls) == (*excluded)[i].end();
    }
    SvmOptions opts = options;
    opts.seed = options.seed + static_cast<std::uint64_t>(cls);
    BinarySvm svm = train_binary_svm(x, y, c, opts, nullptr, std::span<const bool>(mask.get(), x.rows));
    model.weights[cls] = std::move(svm.weights);
    model.bias[cls] = svm.bias;
    model.trained[cls] = true;
  }
  return model;
}

std::vector<double> scores(const LinearModel& model, const FeatureMatrix& x) {
  if (x.cols != model.feature_dim && x.rows > 0) {
    throw DataError("scores: feature dim " + std::to_string(x.cols) + " != model dim " +
                    std::to_string(model.feature_dim));
  }
  const int nc = static_cast<int>(model.classes.size());
  std::vector<double> out(static_cast<std::size_t>(x.rows) * nc);
  for (int i = 0; i < x.rows; ++i) {
    for (int c = 0; c < nc; ++c) {
      out[static_cast<std::size_t>(i) * nc + c] = dot(x.row(i), model.weights[c].data()) + model.bias[c];
    }
  }
  return out;
}

std::vector<double> mean_group_scores(std::span<const double> sample_scores, int num_classes,
                                      std::span<const int> group, int num_groups) {
  if (sample_scores.size() != group.size() * static_cast<std::size_t>(num_classes)) {
    throw DataError("mean_group_scores: shape mismatch");
  }
  std::vector<double> out(static_cast<std::size_t>(num_groups) * num_classes, 0.0);
  std::vector<int> count(num_groups, 0);
  for (std::size_t i = 0; i < group.size(); ++i) {
    ++count[group[i]];
    for (int c = 0; c < num_classes; ++c) {
      out[static_cast<std::size_t>(group[i]) * num_classes + c] += sample_scores[i * num_classes + c];
    }
  }
  for (int g = 0; g < num_groups; ++g) {
    if (count[g] == 0) continue;
    for (int c = 0; c < num_classes; ++c) out[static_cast<std::size_t>(g) * num_classes + c] /= count[g];
  }
  return out;
}

CSelection select_c(const FeatureMatrix& train_x, const std::vector<std::vector<int>>& train_labels,
                    const FeatureMatrix& val_x, const std::vector<std::vector<int>>& val_labels,
                    const std::vector<std::string>& classes, std::vector<double> grid, SelectionMetric metric,
                    const SvmOptions& options) {
  if (grid.empty()) throw DataError("select_c: empty C grid");
  if (val_x.rows == 0) throw DataError("select_c: empty validation set");
  std::sort(grid.begin(), grid.end());
  CSelection best;
  bool have = false;
  for (double c : grid) {
    LinearModel model = train_ovr(train_x, train_labels, classes, c, options);
    const EvalResult res = evaluate_scores(scores(model, val_x), classes, val_labels);
    const double value = metric == SelectionMetric::kMap ? res.map : res.accuracy;
    best.grid_metric.push_back(value);
    if (!have || value > best.metric) {
      best.c = c;
      best.metric = value;
      best.model = std::move(model);
      have = true;
    }
  }
  return best;
}

double max_norm_deviation(const FeatureMatrix& x) {
  double worst = 0;
  for (int i = 0; i < x.rows; ++i) {
    const auto r = x.row(i);
    worst = std::max(worst, std::abs(std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0)) - 1.0));
  }
  return worst;
}

}  // namespace dvk
