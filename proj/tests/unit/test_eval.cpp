#include <gtest/gtest.h>

#include <random>

#include "dvk/eval.hpp"
#include "oracles.hpp"

using namespace dvk;

TEST(Ap, AllPositivesFirst) {
  const std::vector<double> s{5, 4, 3, 2, 1};
  const bool p[] = {true, true, false, false, false};
  EXPECT_EQ(average_precision(s, p), 1.0);
}

TEST(Ap, SinglePositiveAtRank) {
  for (int r = 1; r <= 8; ++r) {
    std::vector<double> s(8);
    bool p[8] = {};
    for (int i = 0; i < 8; ++i) s[i] = 8 - i;
    p[r - 1] = true;
    EXPECT_EQ(average_precision(s, p), 1.0 / r);
  }
}

TEST(Ap, MatchesOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> level(0, 9);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> s(50);
    std::vector<bool> pos(50);
    bool pp[50];
    for (int i = 0; i < 50; ++i) {
      s[i] = level(rng) * 0.1;  // plenty of ties
      pp[i] = pos[i] = (rng() % 3) == 0;
    }
    pp[0] = pos[0] = true;
    EXPECT_NEAR(average_precision(s, std::span<const bool>(pp, 50)), dvk::testing::ap_oracle(s, pos), 1e-12);
  }
}

TEST(Ap, ElevenPointPerfectRanking) {
  const std::vector<double> s{3, 2, 1};
  const bool p[] = {true, false, false};
  EXPECT_NEAR(average_precision(s, p, ApMode::kElevenPoint), 1.0, 1e-15);
}

TEST(Ap, NoPositivesIsAnError) {
  const std::vector<double> s{1, 2};
  const bool p[] = {false, false};
  EXPECT_THROW(average_precision(s, p), std::exception);
}

TEST(TopK, KEqualsClassesAndOracleScores) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  std::vector<double> s(20 * 6);
  std::vector<int> truth(20);
  for (auto& v : s) v = z(rng);
  for (int i = 0; i < 20; ++i) truth[i] = i % 6;
  EXPECT_EQ(top_k_error(s, 6, truth, 6), 0.0);
  for (int i = 0; i < 20; ++i) s[i * 6 + truth[i]] = 100;
  for (int k = 1; k <= 6; ++k) EXPECT_EQ(top_k_error(s, 6, truth, k), 0.0);
}

TEST(TopK, MatchesEnumeration) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> level(0, 4);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(20 * 7);
    std::vector<int> truth(20);
    for (auto& v : s) v = level(rng);
    for (auto& v : truth) v = static_cast<int>(rng() % 7);
    for (int k = 1; k <= 7; ++k) EXPECT_NEAR(top_k_error(s, 7, truth, k), dvk::testing::top_k_oracle(s, 7, truth, k), 1e-12);
  }
}

TEST(MeanClassAccuracy, Cases) {
  EXPECT_EQ(mean_class_accuracy(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}, 3), 1.0);
  // Class 0 always right (9 samples), class 1 always wrong (1 sample).
  std::vector<int> truth(10, 0), pred(10, 0);
  truth[9] = 1;
  EXPECT_EQ(mean_class_accuracy(pred, truth, 2), 0.5);
}

TEST(MeanClassAccuracy, MatchesTally) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    std::vector<int> p(30), y(30);
    for (int i = 0; i < 30; ++i) {
      p[i] = static_cast<int>(rng() % 5);
      y[i] = static_cast<int>(rng() % 5);
    }
    EXPECT_NEAR(mean_class_accuracy(p, y, 5), dvk::testing::mca_oracle(p, y, 5), 1e-12);
  }
}

TEST(EvaluateScores, IgnoredSamplesLeaveTheRanking) {
  const std::vector<std::string> classes{"a", "b"};
  // Sample 2 is a negative for "a" that outranks the positive, but marked difficult.
  const std::vector<double> s{0.5, 0.1, 0.2, 0.9, 0.9, 0.0};
  const std::vector<std::vector<int>> labels{{0}, {1}, {1}};
  const std::vector<std::vector<int>> ignored{{}, {}, {0}};
  EXPECT_LT(evaluate_scores(s, classes, labels, 1).per_class_ap.at("a"), 1.0);
  EXPECT_EQ(evaluate_scores(s, classes, labels, 1, ApMode::kIntegral, &ignored).per_class_ap.at("a"), 1.0);
}
