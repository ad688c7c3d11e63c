#pragma once

#include <span>
#include <string>
#include <vector>

#include "dvk/descriptors.hpp"
#include "dvk/gmm.hpp"
#include "dvk/kernels.hpp"

namespace dvk {

enum class FisherNormalisation {
  kClassicDoubleSqrt,    // sqrt, l2, sqrt, l2
  kIntraNormSingleSqrt,  // sqrt, per-(u_k, v_k) l2, global l2
};

enum class SpatialScheme { kNone, kPyramid, kExtended };

struct FisherConfig {
  FisherNormalisation normalisation = FisherNormalisation::kIntraNormSingleSqrt;
  SpatialScheme spatial = SpatialScheme::kNone;
  int components = 256;
  /// Descriptor dimension seen by the GMM (including appended x, y for kExtended).
  int dim = 80;
  /// Pyramid only: improve each cell before stacking (otherwise improve the stack).
  bool per_cell_improve = true;
};

// An encoded image representation.
struct FeatureVector {
  std::vector<double> values;
  bool l2_normalised = false;
  std::string provenance;

  std::size_t dim() const { return values.size(); }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Responsibilities below this are dropped during accumulation.
inline constexpr double kPosteriorThreshold = 1e-6;

/// Pyramid cells: 1x1, 3x1 (horizontal bands, top to bottom), 2x2 (row-major).
inline constexpr int kPyramidCells = 8;

// Raw Fisher vector [u_1, v_1, ..., u_K, v_K] with
//   u_k = 1/(N sqrt(pi_k))   sum_i q_ik (x_i - mu_k) / sigma_k
//   v_k = 1/(N sqrt(2 pi_k)) sum_i q_ik [((x_i - mu_k) / sigma_k)^2 - 1]
FeatureVector encode_fv_raw(const GmmModel& model, const DescriptorSet& descriptors,
                            kernels::Backend backend = kernels::Backend::kOpenMP);

FeatureVector improve(const FeatureVector& fv, const FisherConfig& config);

// Full image encoding for any spatial scheme. For kExtended the descriptors are
// PCA-projected and the normalised coordinates are appended here; for
// kPyramid, sites pick the cells.
FeatureVector encode_spatial(const GmmModel& model, const DescriptorSet& descriptors, const FisherConfig& config,
                             int image_w, int image_h,
                             kernels::Backend backend = kernels::Backend::kOpenMP);

/// Cell membership (0..7 in stacking order) of a site, for the pyramid.
std::vector<int> pyramid_cells(const Site& site, int image_w, int image_h);

/// Output dimensionality; colour_stack adds a K x 80-D colour encoding (COL+).
long long fv_dimension(const FisherConfig& config, bool colour_stack = false);

inline constexpr int kColourPcaDim = 80;

// Element-wise sign(x) * sqrt(|x|).
void signed_sqrt(std::span<double> values);
/// Scales to unit l2 norm; zero vectors are left untouched. Returns the original norm.
double l2_normalise(std::span<double> values);

}  // namespace dvk
