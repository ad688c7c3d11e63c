#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace dvk {

// Interleaved row-major raster, values nominally in [0, 1].
// Pixel (x, y) channel c lives at data[(y * width + x) * channels + c].
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  RasterImage() = default;
  RasterImage(int w, int h, int c, double fill = 0.0);

  double& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool empty() const { return width <= 0 || height <= 0; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

/// Rec.601 luminance. Grayscale input is returned unchanged.
RasterImage to_grayscale(const RasterImage& image);

// sRGB -> CIE Lab under D65. Channels are stored rescaled into [0, 1]:
// L*/100, (a* + 128)/255, (b* + 128)/255.
RasterImage rgb_to_lab(const RasterImage& image);

/// Bilinear resampling with pixel-centre alignment.
RasterImage resize_bilinear(const RasterImage& image, int new_width, int new_height);

// Resize so that the smaller side equals `side`, preserving aspect ratio.
RasterImage resize_min_side(const RasterImage& image, int side);

RasterImage crop(const RasterImage& image, int x0, int y0, int w, int h);

/// Mirror about the vertical (y) axis.
RasterImage mirror(const RasterImage& image);

// Binary PGM (P5) / PPM (P6), 8-bit.
RasterImage read_pnm(const std::filesystem::path& path);
void write_pnm(const RasterImage& image, const std::filesystem::path& path);

}  // namespace dvk
