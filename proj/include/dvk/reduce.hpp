#pragma once

#include <cstdint>
#include <vector>

#include "dvk/descriptors.hpp"

namespace dvk {

// Mean-centred linear projection onto the leading principal directions.
// basis is target_dim x input_dim, rows orthonormal, ordered by decreasing
// eigenvalue. No whitening is applied.
struct PcaModel {
  int input_dim = 0;
  int target_dim = 0;
  std::vector<double> mean;
  std::vector<double> basis;
  std::vector<double> eigenvalues;  // target_dim, descending
  bool rank_deficient = false;

  friend bool operator==(const PcaModel&, const PcaModel&) = default;
};

struct PcaOptions {
  std::size_t max_samples = 256000;
  std::uint64_t seed = 0;
};

PcaModel fit_pca(const DescriptorSet& samples, int target_dim, const PcaOptions& options = {});

DescriptorSet apply_pca(const PcaModel& model, const DescriptorSet& descriptors);

/// Appends (x/W - 0.5, y/H - 0.5) to every descriptor.
DescriptorSet spatially_extend(const DescriptorSet& descriptors, int image_w, int image_h);

}  // namespace dvk
