#include "dvk/eval.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <spdlog/spdlog.h>

#include "dvk/error.hpp"

namespace dvk {

double average_precision(std::span<const double> scores, std::span<const bool> positives, ApMode mode) {
  if (scores.size() != positives.size()) throw DataError("average_precision: length mismatch");
  const auto num_pos = std::count(positives.begin(), positives.end(), true);
  if (num_pos == 0) throw DataError("average_precision: no positives, AP undefined");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  if (mode == ApMode::kIntegral) {
    double sum = 0;
    long long hits = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (positives[order[r]]) {
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(r + 1);
      }
    }
    return sum / static_cast<double>(num_pos);
  }

  std::vector<double> precision(order.size()), recall(order.size());
  long long hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (positives[order[r]]) ++hits;
    precision[r] = static_cast<double>(hits) / static_cast<double>(r + 1);
    recall[r] = static_cast<double>(hits) / static_cast<double>(num_pos);
  }
  double ap = 0;
  for (int t = 0; t <= 10; ++t) {
    const double level = t / 10.0;
    double best = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (recall[r] >= level - 1e-12) best = std::max(best, precision[r]);
    }
    ap += best / 11.0;
  }
  return ap;
}

double top_k_error(std::span<const double> scores, int num_classes, std::span<const int> truth, int k) {
  if (num_classes < 1 || k < 1 || k > num_classes) throw DataError("top_k_error: k must be in [1, num_classes]");
  if (scores.size() != truth.size() * static_cast<std::size_t>(num_classes)) {
    throw DataError("top_k_error: score matrix does not match sample count");
  }
  if (truth.empty()) return 0.0;
  std::size_t misses = 0;
  std::vector<int> order(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double* row = &scores[i * num_classes];
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return row[a] > row[b]; });
    if (std::find(order.begin(), order.begin() + k, truth[i]) == order.begin() + k) ++misses;
  }
  return static_cast<double>(misses) / static_cast<double>(truth.size());
}

double mean_class_accuracy(std::span<const int> predictions, std::span<const int> truth, int num_classes) {
  if (predictions.size() != truth.size()) throw DataError("mean_class_accuracy: length mismatch");
  std::vector<long long> correct(num_classes, 0), total(num_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes) throw DataError("mean_class_accuracy: label out of range");
    ++total[truth[i]];
    if (predictions[i] == truth[i]) ++correct[truth[i]];
  }
  double sum = 0;
  int used = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (total[c] == 0) {
      spdlog::warn("mean_class_accuracy: class {} has no test samples, excluded", c);
      continue;
    }
    sum += static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    ++used;
  }
  return used == 0 ? 0.0 : sum / used;
}

EvalResult evaluate_scores(std::span<const double> scores, const std::vector<std::string>& classes,
                           const std::vector<std::vector<int>>& labels, int top_k, ApMode mode,
                           const std::vector<std::vector<int>>* ignored) {
  const int nc = static_cast<int>(classes.size());
  const std::size_t n = labels.size();
  if (scores.size() != n * static_cast<std::size_t>(nc)) throw DataError("evaluate_scores: shape mismatch");
  if (ignored && ignored->size() != n) throw DataError("evaluate_scores: ignore list size mismatch");
  EvalResult res;
  res.num_samples = static_cast<int>(n);
  res.num_classes = nc;

  std::vector<double> column(n);
  std::unique_ptr<bool[]> pos(new bool[n]);
  double ap_sum = 0;
  int ap_count = 0;
  for (int c = 0; c < nc; ++c) {
    bool any = false;
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (ignored && std::find((*ignored)[i].begin(), (*ignored)[i].end(), c) != (*ignored)[i].end()) continue;
      column[m] = scores[i * nc + c];
      pos[m] = std::find(labels[i].begin(), labels[i].end(), c) != labels[i].end();
      any = any || pos[m];
      ++m;
    }
    if (!any) continue;
    const double ap = average_precision(std::span<const double>(column.data(), m),
                                        std::span<const bool>(pos.get(), m), mode);
    res.per_class_ap[classes[c]] = ap;
    ap_sum += ap;
    ++ap_count;
  }
  res.map = ap_count ? ap_sum / ap_count : 0.0;

  const bool single_label = std::all_of(labels.begin(), labels.end(), [](const auto& l) { return !l.empty(); });
  if (single_label && n > 0) {
    std::vector<int> truth(n), pred(n);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = labels[i].front();
      const double* row = &scores[i * nc];
      pred[i] = static_cast<int>(std::max_element(row, row + nc) - row);
      if (pred[i] == truth[i]) ++correct;
    }
    res.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    res.mean_class_accuracy = mean_class_accuracy(pred, truth, nc);
    res.top_k = std::min(top_k, nc);
    res.top_k_error = top_k_error(scores, nc, truth, res.top_k);
  }
  return res;
}

}  // namespace dvk
