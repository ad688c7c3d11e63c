#include "dvk/cnn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dvk/error.hpp"

namespace dvk::cnn {

LossKind parse_loss_kind(std::string_view text) {
  if (text == "softmax_ce" || text == "softmax") return LossKind::kSoftmaxCe;
  if (text == "hinge_cls") return LossKind::kHingeCls;
  if (text == "hinge_rank") return LossKind::kHingeRank;
  throw UsageError("unknown loss '" + std::string(text) + "' (softmax_ce, hinge_cls, hinge_rank)");
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kSoftmaxCe: return "softmax_ce";
    case LossKind::kHingeCls: return "hinge_cls";
    case LossKind::kHingeRank: return "hinge_rank";
  }
  return "?";
}

namespace {

int check_shape(const std::vector<double>& scores, int num_classes, const std::vector<std::vector<int>>& labels) {
  if (num_classes < 1 || scores.size() != labels.size() * static_cast<std::size_t>(num_classes)) {
    throw DataError("loss: score matrix does not match label count");
  }
  for (const auto& l : labels) {
    for (int c : l) {
      if (c < 0 || c >= num_classes) throw DataError("loss: label " + std::to_string(c) + " out of range");
    }
  }
  return static_cast<int>(labels.size());
}

bool has_label(const std::vector<int>& l, int c) { return std::find(l.begin(), l.end(), c) != l.end(); }

}  // namespace

LossResult softmax_ce(const std::vector<double>& scores, int num_classes, const std::vector<std::vector<int>>& labels) {
  const int n = check_shape(scores, num_classes, labels);
  LossResult r;
  r.gradient.assign(scores.size(), 0.0);
  if (n == 0) return r;
  for (int i = 0; i < n; ++i) {
    if (labels[i].empty()) throw DataError("softmax_ce: sample " + std::to_string(i) + " has no label");
    const double* s = &scores[static_cast<std::size_t>(i) * num_classes];
    double* g = &r.gradient[static_cast<std::size_t>(i) * num_classes];
    const double top = *std::max_element(s, s + num_classes);
    double z = 0;
    for (int c = 0; c < num_classes; ++c) z += std::exp(s[c] - top);
    const double log_z = top + std::log(z);
    const int y = labels[i].front();
    r.value += log_z - s[y];
    for (int c = 0; c < num_classes; ++c) g[c] = std::exp(s[c] - log_z) / n;
    g[y] -= 1.0 / n;
  }
  r.value /= n;
  return r;
}

LossResult hinge_cls(const std::vector<double>& scores, int num_classes, const std::vector<std::vector<int>>& labels) {
  const int n = check_shape(scores, num_classes, labels);
  LossResult r;
  r.gradient.assign(scores.size(), 0.0);
  if (n == 0) return r;
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < num_classes; ++c) {
      const std::size_t k = static_cast<std::size_t>(i) * num_classes + c;
      const double y = has_label(labels[i], c) ? 1.0 : -1.0;
      const double margin = 1.0 - y * scores[k];
      if (margin > 0) {
        r.value += margin;
        r.gradient[k] = -y / n;
      }
    }
  }
  r.value /= n;
  return r;
}

LossResult hinge_rank(const std::vector<double>& scores, int num_classes, const std::vector<std::vector<int>>& labels) {
  const int n = check_shape(scores, num_classes, labels);
  LossResult r;
  r.gradient.assign(scores.size(), 0.0);
  if (n == 0) return r;
  std::vector<int> pos, neg;
  for (int c = 0; c < num_classes; ++c) {
    pos.clear();
    neg.clear();
    for (int i = 0; i < n; ++i) (has_label(labels[i], c) ? pos : neg).push_back(i);
    for (int p : pos) {
      const std::size_t kp = static_cast<std::size_t>(p) * num_classes + c;
      for (int q : neg) {
        const std::size_t kn = static_cast<std::size_t>(q) * num_classes + c;
        const double margin = 1.0 - scores[kp] + scores[kn];
        if (margin > 0) {
          r.value += margin;
          r.gradient[kp] -= 1.0 / n;
          r.gradient[kn] += 1.0 / n;
        }
      }
    }
  }
  r.value /= n;
  return r;
}

LossResult compute_loss(LossKind kind, const std::vector<double>& scores, int num_classes,
                        const std::vector<std::vector<int>>& labels) {
  switch (kind) {
    case LossKind::kSoftmaxCe: return softmax_ce(scores, num_classes, labels);
    case LossKind::kHingeCls: return hinge_cls(scores, num_classes, labels);
    case LossKind::kHingeRank: return hinge_rank(scores, num_classes, labels);
  }
  throw DataError("compute_loss: unknown loss kind");
}

}  // namespace dvk::cnn
