#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dvk/image.hpp"

namespace dvk {

// Location of a descriptor: patch centre in the original image frame and
// the patch side length (original-frame pixels).
struct Site {
  double x = 0;
  double y = 0;
  double scale = 0;

  friend bool operator==(const Site&, const Site&) = default;
};

// Dense local descriptors, stored row-major (count x dim).
struct DescriptorSet {
  int dim = 0;
  std::vector<double> values;
  std::vector<Site> sites;

  DescriptorSet() = default;
  explicit DescriptorSet(int d) : dim(d) {}

  std::size_t size() const { return sites.size(); }
  bool empty() const { return sites.empty(); }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * dim, static_cast<std::size_t>(dim)};
  }
  std::span<double> row(std::size_t i) { return {values.data() + i * dim, static_cast<std::size_t>(dim)}; }

  void push_back(std::span<const double> descriptor, const Site& site);
  void append(const DescriptorSet& other);

  friend bool operator==(const DescriptorSet&, const DescriptorSet&) = default;
};

struct DenseSamplingParams {
  int stride = 3;
  int num_scales = 7;
  double scale_step = std::sqrt(2.0);
  int upscale_factor = 2;
  int base_patch = 24;

  void validate() const;
  /// Patch side at scale index k, in upscaled-image pixels.
  int patch_size(int k) const;
};

/// Number of sampling positions along one axis of length `extent` for a patch
/// of side `patch`. Zero when the patch does not fit.
int grid_positions(int extent, int patch, int stride);

// Dense multi-scale SIFT (4x4 spatial x 8 orientation bins), RootSIFT
// post-processed. Input must be single-channel.
DescriptorSet extract_dense_sift(const RasterImage& gray, const DenseSamplingParams& params = {});

// Local colour statistics on the same sampling grid as SIFT: per cell of a 4x4
// grid, (mean L, mean a, mean b, var L, var a, var b). Input must be Lab.
DescriptorSet extract_lcs(const RasterImage& lab, const DenseSamplingParams& params = {});

inline constexpr int kSiftDim = 128;
inline constexpr int kLcsDim = 96;

}  // namespace dvk
