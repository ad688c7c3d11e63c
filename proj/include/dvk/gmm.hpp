#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dvk/descriptors.hpp"
#include "dvk/kernels.hpp"

namespace dvk {

// K-component diagonal-covariance Gaussian mixture. All arrays row-major with
// one row per component.
struct GmmModel {
  int components = 0;
  int dim = 0;
  std::vector<double> means;      // K x D
  std::vector<double> variances;  // K x D
  std::vector<double> weights;    // K

  void validate() const;
  friend bool operator==(const GmmModel&, const GmmModel&) = default;
};

struct GmmOptions {
  int max_iters = 100;
  /// Stop when the relative average log-likelihood improvement drops below this.
  double tol = 1e-5;
  /// Variance floor as a fraction of the per-dimension data variance.
  double variance_floor_ratio = 1e-6;
  kernels::Backend backend = kernels::Backend::kOpenMP;
};

struct GmmTrace {
  /// Average per-point log-likelihood after each E-step, in iteration order.
  std::vector<double> log_likelihood;
  int iterations = 0;
};

// EM with k-means++ seeding followed by one hard-assignment M-step.
GmmModel fit_gmm(const DescriptorSet& data, int components, std::uint64_t seed,
                 const GmmOptions& options = {}, GmmTrace* trace = nullptr);

/// Soft assignments q_k(x), summing to 1.
std::vector<double> posteriors(const GmmModel& model, std::span<const double> x);

// Precomputed per-component terms for the posterior kernels.
struct GmmKernelCache {
  std::vector<double> inv_sigma;
  std::vector<double> log_norm;

  explicit GmmKernelCache(const GmmModel& model);
  kernels::MixtureView view(const GmmModel& model) const;
};

/// Average log-likelihood of the data under the model.
double average_log_likelihood(const GmmModel& model, const DescriptorSet& data);

}  // namespace dvk
