#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dvk/svm.hpp"

using namespace dvk;

namespace {

FeatureMatrix matrix(const std::vector<std::vector<double>>& rows) {
  FeatureMatrix x(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) x.row(static_cast<int>(i))[j] = rows[i][j];
  return x;
}

double decision(const BinarySvm& m, std::span<const double> x) {
  double s = m.bias;
  for (std::size_t j = 0; j < x.size(); ++j) s += m.weights[j] * x[j];
  return s;
}

}  // namespace

TEST(Svm, SeparableToySetIsFitPerfectly) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    const int label = i % 2 ? 1 : -1;
    rows.push_back({label * 3.0 + u(rng), u(rng)});
    y.push_back(label);
  }
  SvmOptions o;
  o.tol = 1e-8;
  const FeatureMatrix x = matrix(rows);
  const BinarySvm m = train_binary_svm(x, y, 10.0, o);
  for (int i = 0; i < x.rows; ++i) EXPECT_GT(y[i] * decision(m, x.row(i)), 0.0);
}

TEST(Svm, TwoPointProblem) {
  // With the bias regularised like a weight, symmetry gives b = 0 and w = e1.
  const FeatureMatrix x = matrix({{1, 0, 0}, {-1, 0, 0}});
  SvmOptions o;
  o.tol = 1e-12;
  const BinarySvm m = train_binary_svm(x, std::vector<int>{1, -1}, 1000.0, o);
  EXPECT_NEAR(m.weights[0], 1.0, 1e-6);
  EXPECT_NEAR(m.weights[1], 0.0, 1e-12);
  EXPECT_NEAR(m.bias, 0.0, 1e-6);
  EXPECT_NEAR(decision(m, x.row(0)), 1.0, 1e-6);
  EXPECT_NEAR(decision(m, x.row(1)), -1.0, 1e-6);
}

TEST(Svm, DuplicatedDataWithHalfCIsEquivalent) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> rows, doubled;
  std::vector<int> y, y2;
  for (int i = 0; i < 40; ++i) {
    const int label = z(rng) > 0 ? 1 : -1;
    rows.push_back({z(rng) + label, z(rng), z(rng)});
    y.push_back(label);
  }
  doubled = rows;
  doubled.insert(doubled.end(), rows.begin(), rows.end());
  y2 = y;
  y2.insert(y2.end(), y.begin(), y.end());
  SvmOptions o;
  o.tol = 1e-12;
  o.max_epochs = 100000;
  const BinarySvm a = train_binary_svm(matrix(rows), y, 0.8, o);
  const BinarySvm b = train_binary_svm(matrix(doubled), y2, 0.4, o);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(a.weights[j], b.weights[j], 1e-6);
  EXPECT_NEAR(a.bias, b.bias, 1e-6);
}

TEST(Svm, DualObjectiveIsMonotone) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) {
    y.push_back(i % 2 ? 1 : -1);
    rows.push_back({z(rng) + 0.3 * y.back(), z(rng)});
  }
  SvmTrace trace;
  train_binary_svm(matrix(rows), y, 1.0, {}, &trace);
  for (std::size_t i = 1; i < trace.dual_objective.size(); ++i) {
    EXPECT_LE(trace.dual_objective[i], trace.dual_objective[i - 1] + 1e-12);
  }
}

TEST(Scores, ZeroWeightsGiveBias) {
  LinearModel m;
  m.feature_dim = 2;
  m.classes = {"a", "b"};
  m.weights = {{0, 0}, {0, 0}};
  m.bias = {0.5, -2};
  m.trained = {true, true};
  const auto s = scores(m, matrix({{1, 2}, {3, 4}}));
  EXPECT_EQ(s, (std::vector<double>{0.5, -2, 0.5, -2}));
}

TEST(Scores, MatchDirectDotProducts) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  LinearModel m;
  m.feature_dim = 7;
  for (int c = 0; c < 3; ++c) {
    m.classes.push_back("c" + std::to_string(c));
    m.weights.emplace_back(7);
    for (double& w : m.weights.back()) w = z(rng);
    m.bias.push_back(z(rng));
    m.trained.push_back(true);
  }
  std::vector<std::vector<double>> rows(5, std::vector<double>(7));
  for (auto& r : rows)
    for (double& v : r) v = z(rng);
  const auto s = scores(m, matrix(rows));
  for (int i = 0; i < 5; ++i)
    for (int c = 0; c < 3; ++c) {
      long double d = m.bias[c];
      for (int j = 0; j < 7; ++j) d += static_cast<long double>(m.weights[c][j]) * rows[i][j];
      EXPECT_NEAR(s[i * 3 + c], static_cast<double>(d), 1e-12);
    }
}

TEST(Scores, ScalingWeightsKeepsPerClassRanking) {
  LinearModel m;
  m.feature_dim = 2;
  m.classes = {"a"};
  m.weights = {{1.5, -0.5}};
  m.bias = {0};
  m.trained = {true};
  const FeatureMatrix x = matrix({{1, 2}, {3, 1}, {-1, 0}});
  const auto a = scores(m, x);
  m.weights[0] = {4.5, -1.5};
  const auto b = scores(m, x);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(a[i] < a[j], b[i] < b[j]);
}

TEST(SelectC, SingleValueAndTies) {
  const FeatureMatrix x = matrix({{1, 0}, {-1, 0}, {2, 0}, {-2, 0}});
  const std::vector<std::vector<int>> labels{{0}, {1}, {0}, {1}};
  const std::vector<std::string> classes{"pos", "neg"};
  EXPECT_EQ(select_c(x, labels, x, labels, classes, {3.0}, SelectionMetric::kAccuracy).c, 3.0);
  // Perfectly separable: every C scores 1, so the smallest wins.
  EXPECT_EQ(select_c(x, labels, x, labels, classes, {10, 1, 0.1}, SelectionMetric::kAccuracy).c, 0.1);
}

TEST(SelectC, PicksExhaustiveBest) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> tr, va;
  std::vector<std::vector<int>> ytr, yva;
  for (int i = 0; i < 80; ++i) {
    const int c = i % 2;
    tr.push_back({0.05 * (c ? 1 : -1) + 0.02 * z(rng), z(rng) * 0.01});
    ytr.push_back({c});
    va.push_back({0.05 * (c ? 1 : -1) + 0.02 * z(rng), z(rng) * 0.01});
    yva.push_back({c});
  }
  const std::vector<std::string> classes{"a", "b"};
  const std::vector<double> grid{1e-4, 1e-2, 1, 100};
  const auto sel = select_c(matrix(tr), ytr, matrix(va), yva, classes, grid, SelectionMetric::kAccuracy);
  double best = -1, best_c = 0;
  for (double c : grid) {
    const auto one = select_c(matrix(tr), ytr, matrix(va), yva, classes, {c}, SelectionMetric::kAccuracy);
    if (one.metric > best) {
      best = one.metric;
      best_c = c;
    }
  }
  EXPECT_EQ(sel.c, best_c);
  EXPECT_EQ(sel.metric, best);
}

TEST(Ovr, DifficultSamplesAreExcluded) {
  const FeatureMatrix x = matrix({{1, 0}, {-1, 0}, {-5, 0}});
  const std::vector<std::vector<int>> labels{{0}, {1}, {0}};
  const std::vector<std::vector<int>> excluded{{}, {}, {0}};
  const LinearModel with = train_ovr(x, labels, {"a", "b"}, 1.0, {}, &excluded);
  const LinearModel without = train_ovr(x, labels, {"a", "b"}, 1.0);
  EXPECT_NE(with.weights[0], without.weights[0]);
  EXPECT_GT(with.weights[0][0], 0.0);
}

TEST(MeanGroupScores, AveragesRowsPerGroup) {
  const std::vector<double> s{1, 2, 3, 4, 10, 20};
  const auto m = mean_group_scores(s, 2, std::vector<int>{0, 0, 1}, 2);
  EXPECT_EQ(m, (std::vector<double>{2, 3, 10, 20}));
}
