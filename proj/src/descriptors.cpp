#include "dvk/descriptors.hpp"

#include <algorithm>
#include <array>
#include <numbers>
#include <string>

#include "dvk/error.hpp"

namespace dvk {

void DescriptorSet::push_back(std::span<const double> descriptor, const Site& site) {
  if (static_cast<int>(descriptor.size()) != dim) {
    throw DataError("DescriptorSet: descriptor has " + std::to_string(descriptor.size()) +
                    " entries, expected " + std::to_string(dim));
  }
  values.insert(values.end(), descriptor.begin(), descriptor.end());
  sites.push_back(site);
}

void DescriptorSet::append(const DescriptorSet& other) {
  if (other.empty()) return;
  if (empty() && values.empty()) dim = other.dim;
  if (other.dim != dim) throw DataError("DescriptorSet::append: dimension mismatch");
  values.insert(values.end(), other.values.begin(), other.values.end());
  sites.insert(sites.end(), other.sites.begin(), other.sites.end());
}

void DenseSamplingParams::validate() const {
  if (stride < 1) throw DataError("dense sampling: stride must be >= 1");
  if (num_scales < 1) throw DataError("dense sampling: num_scales must be >= 1");
  if (!(scale_step > 1.0)) throw DataError("dense sampling: scale_step must be > 1");
  if (upscale_factor < 1) throw DataError("dense sampling: upscale_factor must be >= 1");
  if (base_patch < 4) throw DataError("dense sampling: base_patch must be >= 4");
}

int DenseSamplingParams::patch_size(int k) const {
  return static_cast<int>(std::lround(base_patch * std::pow(scale_step, k)));
}

int grid_positions(int extent, int patch, int stride) {
  if (patch > extent) return 0;
  return (extent - patch) / stride + 1;
}

namespace {

constexpr int kSpatialBins = 4;
constexpr int kOrientations = 8;
// Smoothing sigma per scale is bin_size / kMagnification.
constexpr double kMagnification = 6.0;

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double total = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[i + radius];
  }
  for (double& v : k) v /= total;
  return k;
}

// Separable Gaussian blur with clamp-to-edge borders.
std::vector<double> smooth(const std::vector<double>& img, int w, int h, double sigma) {
  if (sigma < 0.25) return img;
  const std::vector<double> k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(img.size()), out(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) {
        acc += k[i + r] * img[static_cast<std::size_t>(y) * w + std::clamp(x + i, 0, w - 1)];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) {
        acc += k[i + r] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

// In-place triangular filter w(d) = max(0, 1 - |d| / half_width) along one
// axis, zero outside the signal. Uses prefix sums of f and i * f, so the cost
// is independent of half_width.
void triangular_filter_1d(double* data, int len, std::ptrdiff_t step, double half_width,
                          std::vector<double>& p0, std::vector<double>& p1) {
  const int reach = std::max(0, static_cast<int>(std::ceil(half_width)) - 1);
  p0.assign(len + 1, 0.0);
  p1.assign(len + 1, 0.0);
  for (int i = 0; i < len; ++i) {
    const double f = data[i * step];
    p0[i + 1] = p0[i] + f;
    p1[i + 1] = p1[i] + i * f;
  }
  const double inv = 1.0 / half_width;
  for (int x = 0; x < len; ++x) {
    const int lo = std::max(0, x - reach);
    const int hi = std::min(len - 1, x + reach);
    const double total = p0[hi + 1] - p0[lo];
    const double right0 = p0[hi + 1] - p0[x + 1];
    const double right1 = p1[hi + 1] - p1[x + 1];
    const double left0 = p0[x] - p0[lo];
    const double left1 = p1[x] - p1[lo];
    const double dist = (right1 - x * right0) + (x * left0 - left1);
    data[x * step] = total - inv * dist;
  }
}

double sample_bilinear(const std::vector<double>& map, int w, int h, double fx, double fy) {
  fx = std::clamp(fx, 0.0, w - 1.0);
  fy = std::clamp(fy, 0.0, h - 1.0);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double ax = fx - x0, ay = fy - y0;
  auto at = [&](int x, int y) { return map[static_cast<std::size_t>(y) * w + x]; };
  return (1 - ay) * ((1 - ax) * at(x0, y0) + ax * at(x1, y0)) +
         ay * ((1 - ax) * at(x0, y1) + ax * at(x1, y1));
}

void root_sift(std::span<double> d) {
  double l1 = 0;
  for (double v : d) l1 += v;
  if (!(l1 > 0)) {
    std::fill(d.begin(), d.end(), 0.0);
    return;
  }
  for (double& v : d) v = std::sqrt(v / l1);
}

RasterImage upscale(const RasterImage& image, int factor) {
  if (factor == 1) return image;
  return resize_bilinear(image, image.width * factor, image.height * factor);
}

}  // namespace

DescriptorSet extract_dense_sift(const RasterImage& gray, const DenseSamplingParams& params) {
  params.validate();
  if (gray.channels != 1) throw DataError("extract_dense_sift: expected a grayscale image");
  const RasterImage up = upscale(gray, params.upscale_factor);
  const int w = up.width, h = up.height;
  const double f = params.upscale_factor;

  DescriptorSet out(kSiftDim);
  std::array<std::vector<double>, kOrientations> channels;
  std::vector<double> p0, p1;
  std::array<double, kSiftDim> desc{};

  for (int k = 0; k < params.num_scales; ++k) {
    const int patch = params.patch_size(k);
    const int nx = grid_positions(w, patch, params.stride);
    const int ny = grid_positions(h, patch, params.stride);
    if (nx == 0 || ny == 0) continue;
    const double bin = patch / static_cast<double>(kSpatialBins);

    const std::vector<double> img = smooth(up.data, w, h, bin / kMagnification);
    for (auto& c : channels) c.assign(img.size(), 0.0);

    // Gradient magnitude split between the two nearest orientation bins.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto px = [&](int xx, int yy) { return img[static_cast<std::size_t>(yy) * w + xx]; };
        const double gx = (x == 0 || x == w - 1)
                              ? (px(std::min(x + 1, w - 1), y) - px(std::max(x - 1, 0), y))
                              : 0.5 * (px(x + 1, y) - px(x - 1, y));
        const double gy = (y == 0 || y == h - 1)
                              ? (px(x, std::min(y + 1, h - 1)) - px(x, std::max(y - 1, 0)))
                              : 0.5 * (px(x, y + 1) - px(x, y - 1));
        const double mag = std::hypot(gx, gy);
        if (mag == 0.0) continue;
        double angle = std::atan2(gy, gx);
        if (angle < 0) angle += 2 * std::numbers::pi;
        const double t = angle / (2 * std::numbers::pi) * kOrientations;
        const int b0 = static_cast<int>(std::floor(t)) % kOrientations;
        const int b1 = (b0 + 1) % kOrientations;
        const double frac = t - std::floor(t);
        const std::size_t idx = static_cast<std::size_t>(y) * w + x;
        channels[b0][idx] += (1 - frac) * mag;
        channels[b1][idx] += frac * mag;
      }
    }
    for (auto& c : channels) {
      for (int y = 0; y < h; ++y) triangular_filter_1d(c.data() + static_cast<std::size_t>(y) * w, w, 1, bin, p0, p1);
      for (int x = 0; x < w; ++x) triangular_filter_1d(c.data() + x, h, w, bin, p0, p1);
    }

    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const int x0 = ix * params.stride, y0 = iy * params.stride;
        for (int by = 0; by < kSpatialBins; ++by) {
          for (int bx = 0; bx < kSpatialBins; ++bx) {
            const double cx = x0 + (bx + 0.5) * bin - 0.5;
            const double cy = y0 + (by + 0.5) * bin - 0.5;
            // Gaussian window with sigma = half the patch width, evaluated at bin centres.
            const double ox = bx - 1.5, oy = by - 1.5;
            const double g = std::exp(-(ox * ox + oy * oy) / 8.0);
            for (int o = 0; o < kOrientations; ++o) {
              desc[(by * kSpatialBins + bx) * kOrientations + o] = g * sample_bilinear(channels[o], w, h, cx, cy);
            }
          }
        }
        for (double& v : desc) v = std::max(v, 0.0);
        root_sift(desc);
        out.push_back(desc, Site{(x0 + patch / 2.0) / f, (y0 + patch / 2.0) / f, patch / f});
      }
    }
  }
  return out;
}

DescriptorSet extract_lcs(const RasterImage& lab, const DenseSamplingParams& params) {
  params.validate();
  if (lab.channels != 3) throw DataError("extract_lcs: expected a 3-channel Lab image");
  const RasterImage up = upscale(lab, params.upscale_factor);
  const double f = params.upscale_factor;

  DescriptorSet out(kLcsDim);
  std::array<double, kLcsDim> desc{};
  for (int k = 0; k < params.num_scales; ++k) {
    const int patch = params.patch_size(k);
    const int nx = grid_positions(up.width, patch, params.stride);
    const int ny = grid_positions(up.height, patch, params.stride);
    if (nx == 0 || ny == 0) continue;
    std::array<int, kSpatialBins + 1> edge{};
    for (int b = 0; b <= kSpatialBins; ++b) edge[b] = b * patch / kSpatialBins;

    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const int x0 = ix * params.stride, y0 = iy * params.stride;
        for (int by = 0; by < kSpatialBins; ++by) {
          for (int bx = 0; bx < kSpatialBins; ++bx) {
            double* cell = &desc[(by * kSpatialBins + bx) * 6];
            const int xa = x0 + edge[bx], xb = x0 + edge[bx + 1];
            const int ya = y0 + edge[by], yb = y0 + edge[by + 1];
            const double n = static_cast<double>(xb - xa) * (yb - ya);
            for (int c = 0; c < 3; ++c) {
              double sum = 0;
              for (int y = ya; y < yb; ++y)
                for (int x = xa; x < xb; ++x) sum += up.at(x, y, c);
              const double mean = sum / n;
              double ss = 0;
              for (int y = ya; y < yb; ++y)
                for (int x = xa; x < xb; ++x) {
                  const double dlt = up.at(x, y, c) - mean;
                  ss += dlt * dlt;
                }
              cell[c] = mean;
              cell[3 + c] = ss / n;
            }
          }
        }
        out.push_back(desc, Site{(x0 + patch / 2.0) / f, (y0 + patch / 2.0) / f, patch / f});
      }
    }
  }
  return out;
}

}  // namespace dvk
