#include "dvk/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dvk/error.hpp"
#include "dvk/reduce.hpp"

namespace dvk {

void signed_sqrt(std::span<double> values) {
  for (double& v : values) v = std::copysign(std::sqrt(std::abs(v)), v);
}

double l2_normalise(std::span<double> values) {
  double ss = 0;
  for (double v : values) ss += v * v;
  const double norm = std::sqrt(ss);
  if (norm > 0) {
    for (double& v : values) v /= norm;
  }
  return norm;
}

FeatureVector encode_fv_raw(const GmmModel& model, const DescriptorSet& descriptors, kernels::Backend backend) {
  if (descriptors.dim != model.dim && !descriptors.empty()) {
    throw DataError("encode_fv_raw: descriptor dim " + std::to_string(descriptors.dim) + " != GMM dim " +
                    std::to_string(model.dim));
  }
  const int k = model.components, d = model.dim;
  FeatureVector fv;
  fv.provenance = "fv-raw";
  fv.values.assign(2 * static_cast<std::size_t>(k) * d, 0.0);
  const std::size_t n = descriptors.size();
  if (n == 0) return fv;

  const GmmKernelCache cache(model);
  std::vector<double> q(n * k);
  kernels::posteriors(backend, cache.view(model), descriptors.values, q, {});
  std::vector<double> s0(k), s1(static_cast<std::size_t>(k) * d), s2(s1.size());
  kernels::accumulate_moments(backend, k, d, descriptors.values, q, model.means, cache.inv_sigma,
                              kPosteriorThreshold, s0, s1, s2);

  const double inv_n = 1.0 / static_cast<double>(n);
  for (int c = 0; c < k; ++c) {
    const double cu = inv_n / std::sqrt(model.weights[c]);
    const double cv = inv_n / std::sqrt(2.0 * model.weights[c]);
    double* u = &fv.values[static_cast<std::size_t>(c) * 2 * d];
    double* v = u + d;
    for (int j = 0; j < d; ++j) {
      u[j] = cu * s1[static_cast<std::size_t>(c) * d + j];
      v[j] = cv * (s2[static_cast<std::size_t>(c) * d + j] - s0[c]);
    }
  }
  return fv;
}

FeatureVector improve(const FeatureVector& fv, const FisherConfig& config) {
  FeatureVector out = fv;
  std::span<double> all(out.values);
  signed_sqrt(all);
  if (config.normalisation == FisherNormalisation::kClassicDoubleSqrt) {
    l2_normalise(all);
    signed_sqrt(all);
    l2_normalise(all);
  } else {
    const std::size_t block = 2 * static_cast<std::size_t>(config.dim);
    if (block == 0 || out.values.size() % block != 0) {
      throw DataError("improve: vector length is not a multiple of the 2D block size");
    }
    for (std::size_t off = 0; off < out.values.size(); off += block) l2_normalise(all.subspan(off, block));
    l2_normalise(all);
  }
  double ss = 0;
  for (double v : out.values) ss += v * v;
  out.l2_normalised = ss > 0;
  out.provenance = fv.provenance + (config.normalisation == FisherNormalisation::kClassicDoubleSqrt
                                        ? "+sqrt2" : "+intra");
  return out;
}

std::vector<int> pyramid_cells(const Site& site, int image_w, int image_h) {
  const int band = std::clamp(static_cast<int>(site.y * 3.0 / image_h), 0, 2);
  const int qx = std::clamp(static_cast<int>(site.x * 2.0 / image_w), 0, 1);
  const int qy = std::clamp(static_cast<int>(site.y * 2.0 / image_h), 0, 1);
  return {0, 1 + band, 4 + qy * 2 + qx};
}

FeatureVector encode_spatial(const GmmModel& model, const DescriptorSet& descriptors, const FisherConfig& config,
                             int image_w, int image_h, kernels::Backend backend) {
  if (config.components != model.components || config.dim != model.dim) {
    throw DataError("encode_spatial: config K/D do not match the GMM");
  }
  switch (config.spatial) {
    case SpatialScheme::kNone:
      return improve(encode_fv_raw(model, descriptors, backend), config);
    case SpatialScheme::kExtended: {
      if (!descriptors.empty() && descriptors.dim + 2 != model.dim) {
        throw DataError("encode_spatial: extended scheme needs descriptors of dim GMM.D - 2");
      }
      DescriptorSet ext = spatially_extend(descriptors, image_w, image_h);
      ext.dim = model.dim;
      FeatureVector fv = improve(encode_fv_raw(model, ext, backend), config);
      fv.provenance += "+xy";
      return fv;
    }
    case SpatialScheme::kPyramid:
      break;
  }

  std::vector<DescriptorSet> cells(kPyramidCells, DescriptorSet(descriptors.dim));
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    for (int c : pyramid_cells(descriptors.sites[i], image_w, image_h)) {
      cells[c].push_back(descriptors.row(i), descriptors.sites[i]);
    }
  }
  const std::size_t cell_dim = 2 * static_cast<std::size_t>(model.components) * model.dim;
  FeatureVector stack;
  stack.values.reserve(cell_dim * kPyramidCells);
  for (const DescriptorSet& cell : cells) {
    FeatureVector raw = encode_fv_raw(model, cell, backend);
    if (config.per_cell_improve) raw = improve(raw, config);
    stack.values.insert(stack.values.end(), raw.values.begin(), raw.values.end());
  }
  stack.provenance = "fv-raw+spm";
  if (!config.per_cell_improve) return improve(stack, config);
  stack.provenance += config.normalisation == FisherNormalisation::kClassicDoubleSqrt ? "+sqrt2" : "+intra";
  stack.l2_normalised = l2_normalise(stack.values) > 0;
  return stack;
}

long long fv_dimension(const FisherConfig& config, bool colour_stack) {
  long long dim = 2LL * config.components * config.dim;
  if (config.spatial == SpatialScheme::kPyramid) dim *= kPyramidCells;
  if (colour_stack) dim += 2LL * config.components * kColourPcaDim;
  return dim;
}

}  // namespace dvk
