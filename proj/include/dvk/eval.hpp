#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace dvk {

enum class ApMode {
  kIntegral,      // precision summed at each positive rank
  kElevenPoint,   // VOC-2007 style interpolated precision at recall 0, 0.1, ..., 1
};

/// Scores ranked descending, ties kept in input order.
double average_precision(std::span<const double> scores, std::span<const bool> positives,
                         ApMode mode = ApMode::kIntegral);

// Fraction of samples whose true label is not among the k highest scores.
// `scores` is row-major (num_samples x num_classes). Ties resolve to the
// lower class index.
double top_k_error(std::span<const double> scores, int num_classes, std::span<const int> truth, int k);

/// Unweighted mean over classes of per-class accuracy; classes absent from truth are skipped.
double mean_class_accuracy(std::span<const int> predictions, std::span<const int> truth, int num_classes);

struct EvalResult {
  std::map<std::string, double> per_class_ap;
  double map = 0;
  double top_k_error = 0;
  int top_k = 0;
  double accuracy = 0;
  double mean_class_accuracy = 0;
  int num_samples = 0;
  int num_classes = 0;
};

// Evaluates a score matrix against multi-label ground truth. Single-label
// metrics (accuracy, top-k, mean class accuracy) use the first label of each
// sample; they are skipped when any sample has no label. `ignored[i]` lists
// classes whose AP ranking leaves sample i out (difficult objects).
EvalResult evaluate_scores(std::span<const double> scores, const std::vector<std::string>& classes,
                           const std::vector<std::vector<int>>& labels, int top_k = 5,
                           ApMode mode = ApMode::kIntegral,
                           const std::vector<std::vector<int>>* ignored = nullptr);

}  // namespace dvk
