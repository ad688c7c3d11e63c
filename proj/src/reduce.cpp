#include "dvk/reduce.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <random>
#include <spdlog/spdlog.h>
#include <string>

#include "dvk/error.hpp"

namespace dvk {

PcaModel fit_pca(const DescriptorSet& samples, int target_dim, const PcaOptions& options) {
  const int d = samples.dim;
  if (target_dim < 1 || target_dim > d) {
    throw DataError("fit_pca: target_dim " + std::to_string(target_dim) + " outside [1, " +
                    std::to_string(d) + "]");
  }
  if (static_cast<int>(samples.size()) < target_dim) {
    throw DataError("fit_pca: insufficient samples (" + std::to_string(samples.size()) + " < " +
                    std::to_string(target_dim) + ")");
  }

  std::vector<std::size_t> rows(samples.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (rows.size() > options.max_samples) {
    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> picked;
    std::sample(rows.begin(), rows.end(), std::back_inserter(picked), options.max_samples, rng);
    rows = std::move(picked);
  }
  const double n = static_cast<double>(rows.size());

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (std::size_t r : rows) mean += Eigen::Map<const Eigen::VectorXd>(samples.row(r).data(), d);
  mean /= n;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd centred(d);
  for (std::size_t r : rows) {
    centred = Eigen::Map<const Eigen::VectorXd>(samples.row(r).data(), d) - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centred);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= n;

  // Eigenvalues come back ascending; the eigenvector set is a full orthonormal
  // basis, so directions beyond the data rank are still a valid completion.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericalError("fit_pca: eigendecomposition failed");

  PcaModel model;
  model.input_dim = d;
  model.target_dim = target_dim;
  model.mean.assign(mean.data(), mean.data() + d);
  model.basis.resize(static_cast<std::size_t>(target_dim) * d);
  model.eigenvalues.resize(target_dim);
  const double top = std::max(solver.eigenvalues()(d - 1), 0.0);
  for (int t = 0; t < target_dim; ++t) {
    const int src = d - 1 - t;
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    std::copy(v.data(), v.data() + d, model.basis.begin() + static_cast<std::ptrdiff_t>(t) * d);
    model.eigenvalues[t] = std::max(solver.eigenvalues()(src), 0.0);
    if (model.eigenvalues[t] <= 1e-12 * std::max(top, 1e-300)) model.rank_deficient = true;
  }
  if (model.rank_deficient) {
    spdlog::warn("fit_pca: samples are rank deficient; trailing directions are an arbitrary orthonormal completion");
  }
  return model;
}

DescriptorSet apply_pca(const PcaModel& model, const DescriptorSet& descriptors) {
  if (descriptors.dim != model.input_dim) {
    throw DataError("apply_pca: descriptor dim " + std::to_string(descriptors.dim) +
                    " does not match model input dim " + std::to_string(model.input_dim));
  }
  DescriptorSet out(model.target_dim);
  out.sites = descriptors.sites;
  out.values.resize(descriptors.size() * model.target_dim);
  const int d = model.input_dim;
  std::vector<double> centred(d);
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    const auto x = descriptors.row(i);
    for (int j = 0; j < d; ++j) centred[j] = x[j] - model.mean[j];
    for (int t = 0; t < model.target_dim; ++t) {
      const double* b = &model.basis[static_cast<std::size_t>(t) * d];
      double acc = 0;
      for (int j = 0; j < d; ++j) acc += b[j] * centred[j];
      out.values[i * model.target_dim + t] = acc;
    }
  }
  return out;
}

DescriptorSet spatially_extend(const DescriptorSet& descriptors, int image_w, int image_h) {
  if (image_w < 1 || image_h < 1) throw DataError("spatially_extend: invalid image size");
  DescriptorSet out(descriptors.dim + 2);
  out.sites = descriptors.sites;
  out.values.reserve(descriptors.size() * out.dim);
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    const auto x = descriptors.row(i);
    out.values.insert(out.values.end(), x.begin(), x.end());
    out.values.push_back(descriptors.sites[i].x / image_w - 0.5);
    out.values.push_back(descriptors.sites[i].y / image_h - 0.5);
  }
  return out;
}

}  // namespace dvk
