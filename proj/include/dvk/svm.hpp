#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dvk/eval.hpp"
#include "dvk/fisher.hpp"

namespace dvk {

// Dense row-major sample matrix (rows = samples).
struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  FeatureMatrix() = default;
  FeatureMatrix(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0.0) {}
  static FeatureMatrix from_features(const std::vector<FeatureVector>& features);

  std::span<const double> row(int i) const {
    return {values.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<double> row(int i) { return {values.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
};

struct SvmOptions {
  /// Stop when (primal - dual) <= tol * |primal|.
  double tol = 1e-4;
  int max_epochs = 2000;
  std::uint64_t seed = 0;
};

struct SvmTrace {
  // Dual objective 0.5 |w|^2 - sum(alpha) after each epoch (non-increasing).
  std::vector<double> dual_objective;
  std::vector<double> duality_gap;
  int epochs = 0;
};

struct BinarySvm {
  std::vector<double> weights;
  double bias = 0;
};

// Minimises 0.5 |w|^2 + 0.5 b^2 + C sum_i max(0, 1 - y_i (<w, x_i> + b)) by
// dual coordinate descent. The bias is a weight on a constant feature of 1.
// Rows with mask[i] == false are ignored.
BinarySvm train_binary_svm(const FeatureMatrix& x, std::span<const int> y, double c, const SvmOptions& options = {},
                           SvmTrace* trace = nullptr, std::span<const bool> mask = {});

struct LinearModel {
  int feature_dim = 0;
  double c = 0;
  std::vector<std::string> classes;
  std::vector<std::vector<double>> weights;  // one per class
  std::vector<double> bias;
  std::vector<bool> trained;
};

// One-vs-rest training. labels[i] lists the positive classes of sample i;
// `excluded[i]` (optional) lists classes for which sample i is left out of
// training (difficult instances).
LinearModel train_ovr(const FeatureMatrix& x, const std::vector<std::vector<int>>& labels,
                      const std::vector<std::string>& classes, double c, const SvmOptions& options = {},
                      const std::vector<std::vector<int>>* excluded = nullptr);

/// Per-class score matrix (rows x classes): <w_c, x> + b_c.
std::vector<double> scores(const LinearModel& model, const FeatureMatrix& x);

/// Averages score rows that share a group id (sample-mode test fusion).
std::vector<double> mean_group_scores(std::span<const double> sample_scores, int num_classes,
                                      std::span<const int> group, int num_groups);

enum class SelectionMetric { kMap, kAccuracy };

struct CSelection {
  double c = 0;
  double metric = 0;
  LinearModel model;
  std::vector<double> grid_metric;
};

// Picks the C in `grid` maximising the validation metric; ties go to the
// smaller C.
CSelection select_c(const FeatureMatrix& train_x, const std::vector<std::vector<int>>& train_labels,
                    const FeatureMatrix& val_x, const std::vector<std::vector<int>>& val_labels,
                    const std::vector<std::string>& classes, std::vector<double> grid, SelectionMetric metric,
                    const SvmOptions& options = {});

inline const std::vector<double> kDefaultCGrid = {0.01, 0.1, 1.0, 10.0};

/// Largest |‖row‖ - 1| over rows; used to lint for non-normalised inputs.
double max_norm_deviation(const FeatureMatrix& x);

}  // namespace dvk
