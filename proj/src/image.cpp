#include "dvk/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "dvk/error.hpp"

namespace dvk {

RasterImage::RasterImage(int w, int h, int c, double fill)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * h * c, fill) {
  if (w < 1 || h < 1 || (c != 1 && c != 3)) {
    throw DataError("RasterImage: invalid geometry " + std::to_string(w) + "x" +
                    std::to_string(h) + "x" + std::to_string(c));
  }
}

RasterImage to_grayscale(const RasterImage& image) {
  if (image.channels == 1) return image;
  RasterImage out(image.width, image.height, 1);
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const double* p = &image.data[i * 3];
    out.data[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return out;
}

namespace {

double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double kDelta = 6.0 / 29.0;
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3 * kDelta * kDelta) + 4.0 / 29.0;
}

}  // namespace

RasterImage rgb_to_lab(const RasterImage& image) {
  if (image.channels != 3) throw DataError("rgb_to_lab: expected 3 channels");
  // D65 reference white.
  constexpr double kXn = 0.95047, kYn = 1.0, kZn = 1.08883;
  RasterImage out(image.width, image.height, 3);
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const double r = srgb_to_linear(image.data[i * 3 + 0]);
    const double g = srgb_to_linear(image.data[i * 3 + 1]);
    const double b = srgb_to_linear(image.data[i * 3 + 2]);
    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    const double fx = lab_f(x / kXn), fy = lab_f(y / kYn), fz = lab_f(z / kZn);
    const double l = 116.0 * fy - 16.0;
    const double a = 500.0 * (fx - fy);
    const double bb = 200.0 * (fy - fz);
    out.data[i * 3 + 0] = l / 100.0;
    out.data[i * 3 + 1] = (a + 128.0) / 255.0;
    out.data[i * 3 + 2] = (bb + 128.0) / 255.0;
  }
  return out;
}

RasterImage resize_bilinear(const RasterImage& image, int new_width, int new_height) {
  if (image.empty()) throw DataError("resize_bilinear: empty image");
  if (new_width == image.width && new_height == image.height) return image;
  RasterImage out(new_width, new_height, image.channels);
  const double sx = static_cast<double>(image.width) / new_width;
  const double sy = static_cast<double>(image.height) / new_height;
  for (int y = 0; y < new_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < new_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels; ++c) {
        const double top = (1 - wx) * image.at(x0, y0, c) + wx * image.at(x1, y0, c);
        const double bot = (1 - wx) * image.at(x0, y1, c) + wx * image.at(x1, y1, c);
        out.at(x, y, c) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

RasterImage resize_min_side(const RasterImage& image, int side) {
  if (image.empty()) throw DataError("resize_min_side: empty image");
  const int small = std::min(image.width, image.height);
  if (small == side) return image;
  const double s = static_cast<double>(side) / small;
  const int w = image.width <= image.height ? side
                                            : std::max(side, static_cast<int>(std::lround(image.width * s)));
  const int h = image.height < image.width ? side
                                           : std::max(side, static_cast<int>(std::lround(image.height * s)));
  return resize_bilinear(image, w, h);
}

RasterImage crop(const RasterImage& image, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > image.width || y0 + h > image.height) {
    throw DataError("crop: window outside image");
  }
  RasterImage out(w, h, image.channels);
  const std::size_t row = static_cast<std::size_t>(w) * image.channels;
  for (int y = 0; y < h; ++y) {
    const double* src = &image.data[(static_cast<std::size_t>(y0 + y) * image.width + x0) * image.channels];
    std::copy(src, src + row, &out.data[static_cast<std::size_t>(y) * row]);
  }
  return out;
}

RasterImage mirror(const RasterImage& image) {
  RasterImage out = image;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        out.at(image.width - 1 - x, y, c) = image.at(x, y, c);
      }
    }
  }
  return out;
}

namespace {

void skip_pnm_space(std::istream& in) {
  for (;;) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      return;
    }
  }
}

}  // namespace

RasterImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  std::string magic;
  in >> magic;
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw DataError(path.string() + ": unsupported image format (expected P5/P6)");
  }
  int w = 0, h = 0, maxval = 0;
  skip_pnm_space(in);
  in >> w;
  skip_pnm_space(in);
  in >> h;
  skip_pnm_space(in);
  in >> maxval;
  in.get();
  if (!in || w < 1 || h < 1 || maxval != 255) {
    throw DataError(path.string() + ": bad PNM header");
  }
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw DataError(path.string() + ": truncated pixel data");
  RasterImage img(w, h, channels);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
  return img;
}

void write_pnm(const RasterImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image " + path.string());
  out << (image.channels == 1 ? "P5" : "P6") << "\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> bytes(image.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace dvk
