#include "dvk/augment.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "dvk/error.hpp"

namespace dvk {

AugmentKind parse_augment_kind(std::string_view text) {
  if (text == "none" || text == "-") return AugmentKind::kNone;
  if (text == "flip" || text == "F") return AugmentKind::kFlip;
  if (text == "crop_flip" || text == "C" || text == "C+F") return AugmentKind::kCropFlip;
  throw DataError("unknown augmentation '" + std::string(text) + "'");
}

Fusion parse_fusion(std::string_view text) {
  if (text == "samples" || text == "f") return Fusion::kSamples;
  if (text == "sum" || text == "s") return Fusion::kSum;
  if (text == "max" || text == "m") return Fusion::kMax;
  if (text == "stack" || text == "t") return Fusion::kStack;
  throw DataError("unknown fusion mode '" + std::string(text) + "'");
}

std::string_view to_string(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::kNone: return "none";
    case AugmentKind::kFlip: return "flip";
    case AugmentKind::kCropFlip: return "crop_flip";
  }
  return "?";
}

std::string_view to_string(Fusion fusion) {
  switch (fusion) {
    case Fusion::kSamples: return "samples";
    case Fusion::kSum: return "sum";
    case Fusion::kMax: return "max";
    case Fusion::kStack: return "stack";
  }
  return "?";
}

int sample_count(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::kNone: return 1;
    case AugmentKind::kFlip: return 2;
    case AugmentKind::kCropFlip: return 10;
  }
  return 0;
}

int crop_base_side(int target) { return static_cast<int>(std::lround(target * 256.0 / 224.0)); }

namespace {

struct Window {
  int x0, y0, w, h;
};

// Centre, TL, TR, BL, BR windows of side `side` in a width x height frame.
std::array<Window, 5> five_crops(int width, int height, int side) {
  const int cx = (width - side) / 2, cy = (height - side) / 2;
  const int rx = width - side, by = height - side;
  return {{{cx, cy, side, side}, {0, 0, side, side}, {rx, 0, side, side}, {0, by, side, side}, {rx, by, side, side}}};
}

void push_with_mirror(std::vector<RasterImage>& out, RasterImage img, bool with_mirror) {
  if (with_mirror) {
    RasterImage m = mirror(img);
    out.push_back(std::move(img));
    out.push_back(std::move(m));
  } else {
    out.push_back(std::move(img));
  }
}

}  // namespace

std::vector<RasterImage> generate_samples(const RasterImage& image, AugmentKind kind, int target, bool for_cnn) {
  if (image.empty() || std::min(image.width, image.height) < 2) {
    throw DataError("generate_samples: degenerate image " + std::to_string(image.width) + "x" +
                    std::to_string(image.height));
  }
  if (target < 1) throw DataError("generate_samples: target must be positive");
  const bool flip = kind != AugmentKind::kNone;
  std::vector<RasterImage> out;
  out.reserve(sample_count(kind));

  if (kind != AugmentKind::kCropFlip) {
    if (!for_cnn) {
      push_with_mirror(out, image, flip);
      return out;
    }
    const RasterImage resized = resize_min_side(image, target);
    const Window c = five_crops(resized.width, resized.height, target)[0];
    push_with_mirror(out, crop(resized, c.x0, c.y0, c.w, c.h), flip);
    return out;
  }

  const int base = crop_base_side(target);
  if (for_cnn) {
    const RasterImage resized = resize_min_side(image, base);
    for (const Window& win : five_crops(resized.width, resized.height, target)) {
      push_with_mirror(out, crop(resized, win.x0, win.y0, win.w, win.h), true);
    }
    return out;
  }
  // Same geometry, mapped back to the original resolution.
  const double scale = std::min(image.width, image.height) / static_cast<double>(base);
  const int side = std::max(1, static_cast<int>(std::lround(target * scale)));
  for (const Window& win : five_crops(image.width, image.height, side)) {
    push_with_mirror(out, crop(image, win.x0, win.y0, win.w, win.h), true);
  }
  return out;
}

TrainCrop random_train_crop(const RasterImage& image, int target, std::uint64_t seed, bool allow_mirror) {
  if (image.width < target || image.height < target) {
    throw DataError("random_train_crop: image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                    " smaller than crop " + std::to_string(target));
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ux(0, image.width - target);
  std::uniform_int_distribution<int> uy(0, image.height - target);
  TrainCrop out;
  out.x0 = ux(rng);
  out.y0 = uy(rng);
  out.mirrored = allow_mirror && std::bernoulli_distribution(0.5)(rng);
  out.image = crop(image, out.x0, out.y0, target, target);
  if (out.mirrored) out.image = mirror(out.image);
  return out;
}

RgbPca compute_rgb_pca(const std::vector<RasterImage>& images, std::size_t max_pixels, std::uint64_t seed) {
  std::size_t total = 0;
  for (const auto& img : images) {
    if (img.channels != 3) throw DataError("compute_rgb_pca: expected RGB images");
    total += img.pixel_count();
  }
  if (total == 0) throw DataError("compute_rgb_pca: no pixels");
  const double keep = max_pixels >= total ? 1.0 : static_cast<double>(max_pixels) / total;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution take(keep);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d second = Eigen::Matrix3d::Zero();
  std::size_t n = 0;
  for (const auto& img : images) {
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
      if (keep < 1.0 && !take(rng)) continue;
      const Eigen::Vector3d p(img.data[i * 3], img.data[i * 3 + 1], img.data[i * 3 + 2]);
      mean += p;
      second += p * p.transpose();
      ++n;
    }
  }
  if (n == 0) throw DataError("compute_rgb_pca: empty pixel sample");
  mean /= static_cast<double>(n);
  const Eigen::Matrix3d cov = second / static_cast<double>(n) - mean * mean.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  RgbPca out;
  for (int i = 0; i < 3; ++i) {
    const int src = 2 - i;
    out.eigenvalues[i] = std::max(solver.eigenvalues()(src), 0.0);
    for (int r = 0; r < 3; ++r) out.basis[r][i] = solver.eigenvectors()(r, src);
  }
  return out;
}

std::array<double, 3> colour_jitter_offset(const RgbPca& pca, double strength, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, 3> alpha{};
  for (int i = 0; i < 3; ++i) alpha[i] = normal(rng) * strength * std::sqrt(std::max(pca.eigenvalues[i], 0.0));
  std::array<double, 3> offset{};
  for (int r = 0; r < 3; ++r) {
    for (int i = 0; i < 3; ++i) offset[r] += pca.basis[r][i] * alpha[i];
  }
  return offset;
}

RasterImage colour_jitter(const RasterImage& image, const RgbPca& pca, double strength, std::uint64_t seed) {
  if (image.channels != 3) throw DataError("colour_jitter: expected an RGB image");
  const auto offset = colour_jitter_offset(pca, strength, seed);
  if (offset == std::array<double, 3>{}) return image;
  RasterImage out = image;
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = std::clamp(out.data[i * 3 + c] + offset[c], 0.0, 1.0);
  }
  return out;
}

std::vector<FeatureVector> fuse(const std::vector<FeatureVector>& features, Fusion mode) {
  if (features.empty()) throw DataError("fuse: empty sample list");
  const std::size_t dim = features.front().dim();
  for (const auto& f : features) {
    if (f.dim() != dim) throw DataError("fuse: samples have mixed dimensions");
  }
  if (mode == Fusion::kSamples) return features;

  FeatureVector out;
  out.provenance = features.front().provenance + "+" + std::string(to_string(mode));
  if (mode == Fusion::kStack) {
    out.values.reserve(dim * features.size());
    for (const auto& f : features) out.values.insert(out.values.end(), f.values.begin(), f.values.end());
  } else {
    out.values = features.front().values;
    for (std::size_t s = 1; s < features.size(); ++s) {
      for (std::size_t j = 0; j < dim; ++j) {
        out.values[j] = mode == Fusion::kSum ? out.values[j] + features[s].values[j]
                                             : std::max(out.values[j], features[s].values[j]);
      }
    }
  }
  out.l2_normalised = l2_normalise(out.values) > 0;
  return {out};
}

}  // namespace dvk
