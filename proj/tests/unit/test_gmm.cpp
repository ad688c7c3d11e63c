#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <random>

#include "dvk/gmm.hpp"
#include "oracles.hpp"

using namespace dvk;

namespace {

DescriptorSet two_clusters(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  DescriptorSet s(2);
  for (int i = 0; i < n; ++i) {
    const double cx = i % 2 == 0 ? 0.0 : 10.0;
    s.push_back(std::vector<double>{cx + z(rng), z(rng)}, {});
  }
  return s;
}

}  // namespace

TEST(Gmm, SingleComponentIsClosedForm) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  DescriptorSet s(3);
  for (int i = 0; i < 200; ++i) s.push_back(std::vector<double>{z(rng), 2 + 3 * z(rng), -1 + 0.5 * z(rng)}, {});
  const GmmModel m = fit_gmm(s, 1, 7);
  for (int j = 0; j < 3; ++j) {
    long double mean = 0, var = 0;
    for (std::size_t i = 0; i < s.size(); ++i) mean += s.row(i)[j];
    mean /= s.size();
    for (std::size_t i = 0; i < s.size(); ++i) var += (s.row(i)[j] - mean) * (s.row(i)[j] - mean);
    var /= s.size();
    EXPECT_NEAR(m.means[j], static_cast<double>(mean), 1e-10);
    EXPECT_NEAR(m.variances[j], static_cast<double>(var), 1e-10);
  }
  EXPECT_EQ(m.weights, std::vector<double>{1.0});
}

TEST(Gmm, RecoversTwoSeparatedClusters) {
  const GmmModel m = fit_gmm(two_clusters(40000, 2), 2, 3);
  const int lo = m.means[0] < m.means[2] ? 0 : 1;
  EXPECT_NEAR(m.means[lo * 2], 0.0, 0.05);
  EXPECT_NEAR(m.means[lo * 2 + 1], 0.0, 0.05);
  EXPECT_NEAR(m.means[(1 - lo) * 2], 10.0, 0.05);
  EXPECT_NEAR(m.means[(1 - lo) * 2 + 1], 0.0, 0.05);
}

TEST(Gmm, LogLikelihoodNeverDecreases) {
  for (int seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const GmmModel truth = dvk::testing::random_gmm(6, 4, rng);
    const DescriptorSet data = dvk::testing::random_descriptors(truth, 800, 1, 1, rng);
    GmmTrace trace;
    GmmOptions opts;
    opts.tol = 0;
    opts.max_iters = 40;
    fit_gmm(data, 6, seed, opts, &trace);
    for (std::size_t i = 1; i < trace.log_likelihood.size(); ++i) {
      EXPECT_GE(trace.log_likelihood[i] - trace.log_likelihood[i - 1], -1e-8);
    }
  }
}

TEST(Gmm, SupportsK256) {
  std::mt19937_64 rng(9);
  const GmmModel truth = dvk::testing::random_gmm(8, 3, rng);
  const DescriptorSet data = dvk::testing::random_descriptors(truth, 3000, 1, 1, rng);
  GmmOptions opts;
  opts.max_iters = 3;
  const GmmModel m = fit_gmm(data, 256, 1, opts);
  EXPECT_EQ(m.components, 256);
  EXPECT_NO_THROW(m.validate());
}

TEST(Gmm, FewerPointsThanComponentsIsAnError) {
  DescriptorSet s(2);
  s.push_back(std::vector<double>{0, 0}, {});
  EXPECT_THROW(fit_gmm(s, 4, 0), std::exception);
}

TEST(Gmm, SameSeedSameModelAcrossThreadCounts) {
  const DescriptorSet data = two_clusters(600, 4);
  omp_set_num_threads(1);
  const GmmModel a = fit_gmm(data, 3, 11);
  omp_set_num_threads(4);
  const GmmModel b = fit_gmm(data, 3, 11);
  GmmOptions serial;
  serial.backend = kernels::Backend::kSerial;
  const GmmModel c = fit_gmm(data, 3, 11, serial);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Posteriors, SingleComponentIsOne) {
  GmmModel m{1, 2, {0, 0}, {1, 1}, {1}};
  EXPECT_EQ(posteriors(m, std::vector<double>{3, -4}), std::vector<double>{1.0});
}

TEST(Posteriors, DistantComponentIsNegligible) {
  GmmModel m{2, 1, {0, 100}, {1, 1}, {0.5, 0.5}};
  EXPECT_GT(posteriors(m, std::vector<double>{0})[0], 1 - 1e-10);
}

TEST(Posteriors, MatchDirectDensityRatio) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 50; ++t) {
    const GmmModel m = dvk::testing::random_gmm(5, 4, rng);
    const DescriptorSet x = dvk::testing::random_descriptors(m, 1, 1, 1, rng);
    const auto q = posteriors(m, x.row(0));
    const auto oracle = dvk::testing::posterior_oracle(m, x.row(0).data());
    double sum = 0;
    for (int k = 0; k < 5; ++k) {
      EXPECT_NEAR(q[k], static_cast<double>(oracle[k]), 1e-12);
      sum += q[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-14);
  }
}
