#pragma once

#include <string_view>
#include <vector>

namespace dvk::cnn {

enum class LossKind { kSoftmaxCe, kHingeCls, kHingeRank };

LossKind parse_loss_kind(std::string_view text);
std::string_view to_string(LossKind kind);

// Loss value and its (sub)gradient with respect to the N x C score matrix.
// All three losses are averaged over the N samples of the batch.
struct LossResult {
  double value = 0.0;
  std::vector<double> gradient;
};

// -log softmax(s)_y; only the first label of each sample is used.
LossResult softmax_ce(const std::vector<double>& scores, int num_classes, const std::vector<std::vector<int>>& labels);

// Per class: sum_pos max(0, 1 - s) + sum_neg max(0, 1 + s).
LossResult hinge_cls(const std::vector<double>& scores, int num_classes, const std::vector<std::vector<int>>& labels);

// Per class: sum over (pos, neg) pairs in the batch of max(0, 1 - s_pos + s_neg).
// Classes without a positive or a negative in the batch contribute nothing.
LossResult hinge_rank(const std::vector<double>& scores, int num_classes, const std::vector<std::vector<int>>& labels);

LossResult compute_loss(LossKind kind, const std::vector<double>& scores, int num_classes,
                        const std::vector<std::vector<int>>& labels);

}  // namespace dvk::cnn
