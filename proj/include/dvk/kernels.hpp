#pragma once

// Data-parallel inner loops shared by the GMM, Fisher and CNN modules.
//
// Every kernel exists twice: a plain serial reference and an OpenMP version.
// Both perform each floating-point reduction in the same order (parallelism
// is only over independent output rows or components), so their results are
// bit-identical and independent of the thread count. The serial versions are
// kept for testing and benchmarking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

namespace dvk::kernels {

enum class Backend { kSerial, kOpenMP };

namespace detail {

template <typename Real>
inline void gemm_row(bool trans_a, bool trans_b, int i, int n, int k, Real alpha, const Real* a,
                     int lda, const Real* b, int ldb, Real beta, Real* c, int ldc) {
  Real* crow = c + static_cast<std::size_t>(i) * ldc;
  if (beta == Real(0)) {
    std::fill(crow, crow + n, Real(0));
  } else if (beta != Real(1)) {
    for (int j = 0; j < n; ++j) crow[j] *= beta;
  }
  if (!trans_b) {
    for (int p = 0; p < k; ++p) {
      const Real aip = alpha * (trans_a ? a[static_cast<std::size_t>(p) * lda + i]
                                        : a[static_cast<std::size_t>(i) * lda + p]);
      if (aip == Real(0)) continue;
      const Real* brow = b + static_cast<std::size_t>(p) * ldb;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  } else {
    for (int j = 0; j < n; ++j) {
      const Real* brow = b + static_cast<std::size_t>(j) * ldb;
      Real acc = 0;
      for (int p = 0; p < k; ++p) {
        acc += (trans_a ? a[static_cast<std::size_t>(p) * lda + i]
                        : a[static_cast<std::size_t>(i) * lda + p]) *
               brow[p];
      }
      crow[j] += alpha * acc;
    }
  }
}

}  // namespace detail

/// C = alpha * op(A) * op(B) + beta * C, row-major. op(A) is m x k, op(B) is k x n.
template <typename Real>
void gemm(Backend backend, bool trans_a, bool trans_b, int m, int n, int k, Real alpha,
          const Real* a, int lda, const Real* b, int ldb, Real beta, Real* c, int ldc) {
  if (backend == Backend::kSerial) {
    for (int i = 0; i < m; ++i) {
      detail::gemm_row(trans_a, trans_b, i, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    detail::gemm_row(trans_a, trans_b, i, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  }
}

// Diagonal-covariance mixture in the layout used by the kernels: all arrays
// row-major, one row per component.
struct MixtureView {
  int components = 0;
  int dim = 0;
  std::span<const double> means;          // K x D
  std::span<const double> inv_sigma;      // K x D, 1/sigma
  std::span<const double> log_norm;       // K, log pi_k - 0.5 * sum_d log(2 pi sigma^2_kd)
};

namespace detail {

inline double log_posterior_row(const MixtureView& mix, const double* x, double* q) {
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < mix.components; ++k) {
    const double* mu = &mix.means[static_cast<std::size_t>(k) * mix.dim];
    const double* is = &mix.inv_sigma[static_cast<std::size_t>(k) * mix.dim];
    double quad = 0;
    for (int d = 0; d < mix.dim; ++d) {
      const double z = (x[d] - mu[d]) * is[d];
      quad += z * z;
    }
    q[k] = mix.log_norm[k] - 0.5 * quad;
    best = std::max(best, q[k]);
  }
  double total = 0;
  for (int k = 0; k < mix.components; ++k) {
    q[k] = std::exp(q[k] - best);
    total += q[k];
  }
  for (int k = 0; k < mix.components; ++k) q[k] /= total;
  return best + std::log(total);
}

}  // namespace detail

// Posterior responsibilities q (N x K) for points x (N x D), computed with
// log-sum-exp. Returns per-point log-likelihoods in `log_lik` when non-empty.
inline void posteriors(Backend backend, const MixtureView& mix, std::span<const double> x,
                       std::span<double> q, std::span<double> log_lik) {
  const int n = static_cast<int>(x.size() / static_cast<std::size_t>(mix.dim));
  const bool want_ll = !log_lik.empty();
  auto row = [&](int i) {
    const double ll = detail::log_posterior_row(mix, &x[static_cast<std::size_t>(i) * mix.dim],
                                                &q[static_cast<std::size_t>(i) * mix.components]);
    if (want_ll) log_lik[i] = ll;
  };
  if (backend == Backend::kSerial) {
    for (int i = 0; i < n; ++i) row(i);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) row(i);
}

// Weighted zeroth/first/second moments about per-component centres:
//   s0[k]    = sum_i q_ik
//   s1[k][d] = sum_i q_ik z_ikd
//   s2[k][d] = sum_i q_ik z_ikd^2,   z_ikd = (x_id - centre_kd) * scale_kd
// Responsibilities below `min_q` are skipped. Reductions run over i in
// ascending order for every (k, d).
inline void accumulate_moments(Backend backend, int components, int dim, std::span<const double> x,
                               std::span<const double> q, std::span<const double> centres,
                               std::span<const double> scale, double min_q, std::span<double> s0,
                               std::span<double> s1, std::span<double> s2) {
  const int n = static_cast<int>(x.size() / static_cast<std::size_t>(dim));
  auto component = [&](int k) {
    const double* c = &centres[static_cast<std::size_t>(k) * dim];
    const double* s = &scale[static_cast<std::size_t>(k) * dim];
    double* m1 = &s1[static_cast<std::size_t>(k) * dim];
    double* m2 = &s2[static_cast<std::size_t>(k) * dim];
    std::fill(m1, m1 + dim, 0.0);
    std::fill(m2, m2 + dim, 0.0);
    double m0 = 0;
    for (int i = 0; i < n; ++i) {
      const double w = q[static_cast<std::size_t>(i) * components + k];
      if (w < min_q || w == 0.0) continue;
      m0 += w;
      const double* xi = &x[static_cast<std::size_t>(i) * dim];
      for (int d = 0; d < dim; ++d) {
        const double z = (xi[d] - c[d]) * s[d];
        m1[d] += w * z;
        m2[d] += w * z * z;
      }
    }
    s0[k] = m0;
  };
  if (backend == Backend::kSerial) {
    for (int k = 0; k < components; ++k) component(k);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int k = 0; k < components; ++k) component(k);
}

}  // namespace dvk::kernels
