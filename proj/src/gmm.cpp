#include "dvk/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "dvk/error.hpp"

namespace dvk {

namespace {

// Points per E-step block. Fixed so that the reduction order (and hence the
// result) does not depend on how many threads run the kernels.
constexpr std::size_t kBlock = 4096;
constexpr double kMinWeight = 1e-12;

struct Moments {
  std::vector<double> s0, s1, s2;
  Moments(int k, int d) : s0(k, 0.0), s1(static_cast<std::size_t>(k) * d, 0.0), s2(s1.size(), 0.0) {}
};

std::vector<double> data_variance(const DescriptorSet& data) {
  const int d = data.dim;
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    for (int j = 0; j < d; ++j) mean[j] += x[j];
  }
  for (double& m : mean) m /= static_cast<double>(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    for (int j = 0; j < d; ++j) var[j] += (x[j] - mean[j]) * (x[j] - mean[j]);
  }
  for (double& v : var) v /= static_cast<double>(data.size());
  return var;
}

double sq_dist(std::span<const double> a, const double* b) {
  double s = 0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

std::vector<double> kmeanspp_centres(const DescriptorSet& data, int k, std::mt19937_64& rng) {
  const std::size_t n = data.size();
  const int d = data.dim;
  std::vector<double> centres(static_cast<std::size_t>(k) * d);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::size_t first = pick(rng);
  std::copy_n(data.row(first).data(), d, centres.begin());
  std::vector<double> best(n);
  for (std::size_t i = 0; i < n; ++i) best[i] = sq_dist(data.row(i), centres.data());

  for (int c = 1; c < k; ++c) {
    double total = 0;
    for (double b : best) total += b;
    std::size_t chosen = pick(rng);
    if (total > 0) {
      const double target = unit(rng) * total;
      double run = 0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        run += best[i];
        if (run >= target && best[i] > 0) {
          chosen = i;
          break;
        }
      }
    }
    double* dst = &centres[static_cast<std::size_t>(c) * d];
    std::copy_n(data.row(chosen).data(), d, dst);
    for (std::size_t i = 0; i < n; ++i) best[i] = std::min(best[i], sq_dist(data.row(i), dst));
  }
  return centres;
}

void normalise_weights(std::vector<double>& w) {
  double total = 0;
  for (double& v : w) {
    v = std::max(v, kMinWeight);
    total += v;
  }
  for (double& v : w) v /= total;
}

GmmModel hard_assignment_init(const DescriptorSet& data, const std::vector<double>& centres, int k,
                              const std::vector<double>& floor, const std::vector<double>& global_var) {
  const int d = data.dim;
  GmmModel model;
  model.components = k;
  model.dim = d;
  model.means.assign(static_cast<std::size_t>(k) * d, 0.0);
  model.variances.assign(model.means.size(), 0.0);
  model.weights.assign(k, 0.0);
  std::vector<int> label(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double dist = sq_dist(data.row(i), &centres[static_cast<std::size_t>(c) * d]);
      if (dist < best) {
        best = dist;
        label[i] = c;
      }
    }
    model.weights[label[i]] += 1.0;
    const auto x = data.row(i);
    for (int j = 0; j < d; ++j) model.means[static_cast<std::size_t>(label[i]) * d + j] += x[j];
  }
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < d; ++j) {
      double& m = model.means[static_cast<std::size_t>(c) * d + j];
      m = model.weights[c] > 0 ? m / model.weights[c] : centres[static_cast<std::size_t>(c) * d + j];
    }
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    for (int j = 0; j < d; ++j) {
      const double diff = x[j] - model.means[static_cast<std::size_t>(label[i]) * d + j];
      model.variances[static_cast<std::size_t>(label[i]) * d + j] += diff * diff;
    }
  }
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < d; ++j) {
      double& v = model.variances[static_cast<std::size_t>(c) * d + j];
      v = model.weights[c] > 1 ? v / model.weights[c] : global_var[j];
      v = std::max(v, floor[j]);
    }
    model.weights[c] /= static_cast<double>(data.size());
  }
  normalise_weights(model.weights);
  return model;
}

// One E-step over the whole dataset: returns the average log-likelihood and
// fills moments about the current means.
double expectation(const GmmModel& model, const DescriptorSet& data, kernels::Backend backend,
                   Moments& total) {
  const int k = model.components, d = model.dim;
  const GmmKernelCache cache(model);
  const auto view = cache.view(model);
  const std::vector<double> ones(static_cast<std::size_t>(k) * d, 1.0);
  Moments block(k, d);
  std::vector<double> q, ll;
  std::fill(total.s0.begin(), total.s0.end(), 0.0);
  std::fill(total.s1.begin(), total.s1.end(), 0.0);
  std::fill(total.s2.begin(), total.s2.end(), 0.0);
  double log_lik = 0;
  for (std::size_t start = 0; start < data.size(); start += kBlock) {
    const std::size_t count = std::min(kBlock, data.size() - start);
    const std::span<const double> x(data.values.data() + start * d, count * d);
    q.resize(count * k);
    ll.resize(count);
    kernels::posteriors(backend, view, x, q, ll);
    for (double v : ll) log_lik += v;
    kernels::accumulate_moments(backend, k, d, x, q, model.means, ones, 0.0, block.s0, block.s1, block.s2);
    for (std::size_t i = 0; i < block.s0.size(); ++i) total.s0[i] += block.s0[i];
    for (std::size_t i = 0; i < block.s1.size(); ++i) {
      total.s1[i] += block.s1[i];
      total.s2[i] += block.s2[i];
    }
  }
  return log_lik / static_cast<double>(data.size());
}

void maximisation(GmmModel& model, const Moments& m, std::size_t n, const std::vector<double>& floor) {
  const int d = model.dim;
  for (int c = 0; c < model.components; ++c) {
    const double nk = m.s0[c];
    model.weights[c] = nk / static_cast<double>(n);
    if (!(nk > 1e-10)) continue;  // collapsed: keep mean and variance
    for (int j = 0; j < d; ++j) {
      const std::size_t idx = static_cast<std::size_t>(c) * d + j;
      const double shift = m.s1[idx] / nk;
      model.means[idx] += shift;
      model.variances[idx] = std::max(m.s2[idx] / nk - shift * shift, floor[j]);
    }
  }
  normalise_weights(model.weights);
}

}  // namespace

void GmmModel::validate() const {
  if (components < 1 || dim < 1) throw DataError("GmmModel: empty model");
  const std::size_t kd = static_cast<std::size_t>(components) * dim;
  if (means.size() != kd || variances.size() != kd || weights.size() != static_cast<std::size_t>(components)) {
    throw DataError("GmmModel: array sizes inconsistent with K x D");
  }
  for (double v : variances) {
    if (!(v > 0)) throw DataError("GmmModel: non-positive variance");
  }
  for (double w : weights) {
    if (!(w > 0)) throw DataError("GmmModel: non-positive weight");
  }
}

GmmKernelCache::GmmKernelCache(const GmmModel& model)
    : inv_sigma(model.variances.size()), log_norm(model.components) {
  const int d = model.dim;
  for (int c = 0; c < model.components; ++c) {
    double log_det = 0;
    for (int j = 0; j < d; ++j) {
      const double v = model.variances[static_cast<std::size_t>(c) * d + j];
      inv_sigma[static_cast<std::size_t>(c) * d + j] = 1.0 / std::sqrt(v);
      log_det += std::log(2.0 * std::numbers::pi * v);
    }
    log_norm[c] = std::log(model.weights[c]) - 0.5 * log_det;
  }
}

kernels::MixtureView GmmKernelCache::view(const GmmModel& model) const {
  return {model.components, model.dim, model.means, inv_sigma, log_norm};
}

GmmModel fit_gmm(const DescriptorSet& data, int components, std::uint64_t seed, const GmmOptions& options,
                 GmmTrace* trace) {
  if (components < 1) throw DataError("fit_gmm: component count must be >= 1");
  if (data.size() < static_cast<std::size_t>(components)) {
    throw DataError("fit_gmm: " + std::to_string(data.size()) + " samples for " + std::to_string(components) +
                    " components");
  }
  const std::vector<double> global_var = data_variance(data);
  std::vector<double> floor(global_var.size());
  for (std::size_t j = 0; j < floor.size(); ++j) {
    floor[j] = std::max(options.variance_floor_ratio * global_var[j], 1e-12);
  }

  std::mt19937_64 rng(seed);
  const std::vector<double> centres = kmeanspp_centres(data, components, rng);
  GmmModel model = hard_assignment_init(data, centres, components, floor, global_var);

  Moments moments(components, data.dim);
  double previous = -std::numeric_limits<double>::infinity();
  int iter = 0;
  for (;; ++iter) {
    const double ll = expectation(model, data, options.backend, moments);
    if (!std::isfinite(ll)) throw NumericalError("fit_gmm: non-finite log-likelihood");
    if (trace) trace->log_likelihood.push_back(ll);
    if (iter > 0 && ll - previous < options.tol * std::abs(previous)) break;
    if (iter >= options.max_iters) break;
    previous = ll;
    maximisation(model, moments, data.size(), floor);
  }
  if (trace) trace->iterations = iter;
  return model;
}

std::vector<double> posteriors(const GmmModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.dim) throw DataError("posteriors: dimension mismatch");
  const GmmKernelCache cache(model);
  std::vector<double> q(model.components);
  kernels::posteriors(kernels::Backend::kSerial, cache.view(model), x, q, {});
  return q;
}

double average_log_likelihood(const GmmModel& model, const DescriptorSet& data) {
  if (data.dim != model.dim) throw DataError("average_log_likelihood: dimension mismatch");
  Moments m(model.components, model.dim);
  return expectation(model, data, kernels::Backend::kSerial, m);
}

}  // namespace dvk
