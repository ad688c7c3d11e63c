#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "dvk/fisher.hpp"
#include "dvk/image.hpp"

namespace dvk {

enum class AugmentKind { kNone, kFlip, kCropFlip };
enum class Fusion { kSamples, kSum, kMax, kStack };

struct AugmentStrategy {
  AugmentKind kind = AugmentKind::kNone;
  Fusion fusion_train = Fusion::kSamples;
  Fusion fusion_test = Fusion::kSum;
};

AugmentKind parse_augment_kind(std::string_view text);
Fusion parse_fusion(std::string_view text);
std::string_view to_string(AugmentKind kind);
std::string_view to_string(Fusion fusion);

/// Number of samples a strategy produces: 1, 2 or 10.
int sample_count(AugmentKind kind);

/// Side the image is resized to before C+F cropping (256 for a 224 target).
int crop_base_side(int target);

// Deterministic test-time samples. Order is (centre, TL, TR, BL, BR) x
// (original, mirrored) for crop_flip and (original, mirrored) for flip.
// With for_cnn the samples are target x target; otherwise the same crop
// geometry is taken at the original resolution (no-augmentation = full image).
std::vector<RasterImage> generate_samples(const RasterImage& image, AugmentKind kind, int target, bool for_cnn);

struct TrainCrop {
  RasterImage image;
  int x0 = 0;
  int y0 = 0;
  bool mirrored = false;
};

// Uniformly placed target x target crop with a 50% mirror. The caller resizes
// the image (smallest side = crop_base_side) beforehand.
TrainCrop random_train_crop(const RasterImage& image, int target, std::uint64_t seed, bool allow_mirror = true);

struct RgbPca {
  std::array<std::array<double, 3>, 3> basis{};  // columns are principal directions
  std::array<double, 3> eigenvalues{};
};

RgbPca compute_rgb_pca(const std::vector<RasterImage>& images, std::size_t max_pixels, std::uint64_t seed);

/// Colour offset sum_i alpha_i p_i with alpha_i ~ N(0, strength^2 lambda_i).
std::array<double, 3> colour_jitter_offset(const RgbPca& pca, double strength, std::uint64_t seed);

RasterImage colour_jitter(const RasterImage& image, const RgbPca& pca, double strength, std::uint64_t seed);

// Sample fusion. kSamples passes the list through; the pooled modes return a
// single l2-normalised vector.
std::vector<FeatureVector> fuse(const std::vector<FeatureVector>& features, Fusion mode);

}  // namespace dvk
