#include "dvk/harness/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>

#include "dvk/error.hpp"

namespace dvk::harness {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::array<double, 3> random_colour(Rng& rng, double lo, double hi) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

void add_noise(RasterImage& img, Rng& rng, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  for (double& v : img.data) v = std::clamp(v + n(rng), 0.0, 1.0);
}

RasterImage stripes(int size, Rng& rng) {
  const double theta = uniform(rng, 0, std::numbers::pi);
  const double period = uniform(rng, 6.0, 14.0);
  const double phase = uniform(rng, 0, 2 * std::numbers::pi);
  const auto fg = random_colour(rng, 0.55, 1.0), bg = random_colour(rng, 0.0, 0.45);
  RasterImage img(size, size, 3);
  const double cx = std::cos(theta), sy = std::sin(theta);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * (x * cx + y * sy) / period + phase);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = bg[c] + t * (fg[c] - bg[c]);
    }
  }
  return img;
}

RasterImage blobs(int size, Rng& rng) {
  const auto fg = random_colour(rng, 0.55, 1.0), bg = random_colour(rng, 0.0, 0.45);
  const int count = std::uniform_int_distribution<int>(6, 12)(rng);
  std::vector<std::array<double, 3>> b(count);
  for (auto& blob : b) blob = {uniform(rng, 0, size), uniform(rng, 0, size), uniform(rng, 2.5, 5.5)};
  RasterImage img(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double t = 0;
      for (const auto& blob : b) {
        const double d2 = (x - blob[0]) * (x - blob[0]) + (y - blob[1]) * (y - blob[1]);
        t = std::max(t, std::exp(-d2 / (2 * blob[2] * blob[2])));
      }
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = bg[c] + t * (fg[c] - bg[c]);
    }
  }
  return img;
}

// Shape membership in a unit frame: (u, v) in [-1, 1]^2 around the centre.
bool inside_shape(int cls, double u, double v) {
  const double au = std::abs(u), av = std::abs(v);
  const double r = std::hypot(u, v);
  switch (cls) {
    case 0: return r <= 1.0;                                      // disc
    case 1: return au <= 0.85 && av <= 0.85;                      // square
    case 2: return v <= 0.8 && v >= -0.9 + 1.7 * au / 0.95;       // triangle pointing up
    case 3: return v >= -0.8 && v <= 0.9 - 1.7 * au / 0.95;       // triangle pointing down
    case 4: return (au <= 0.25 && av <= 0.95) || (av <= 0.25 && au <= 0.95);  // plus
    case 5: return (std::abs(u - v) <= 0.35 && std::abs(u + v) <= 1.6) ||
                   (std::abs(u + v) <= 0.35 && std::abs(u - v) <= 1.6);       // saltire
    case 6: return r <= 1.0 && r >= 0.6;                          // ring
    case 7: return au <= 0.9 && av <= 0.9 && (au >= 0.55 || av >= 0.55);       // square outline
    case 8: return au <= 1.0 && av <= 0.4;                        // horizontal bar
    case 9: return au <= 0.4 && av <= 1.0;                        // vertical bar
    default: return false;
  }
}

RasterImage shape(int cls, int size, Rng& rng) {
  const auto bg = random_colour(rng, 0.0, 0.5);
  auto fg = random_colour(rng, 0.0, 1.0);
  // Keep the shape visible against the background.
  const double contrast = (fg[0] + fg[1] + fg[2] - bg[0] - bg[1] - bg[2]) / 3.0;
  if (std::abs(contrast) < 0.3) {
    for (double& c : fg) c = std::min(1.0, c + 0.45);
  }
  const double radius = uniform(rng, 0.22, 0.3) * size;
  const double angle = uniform(rng, -0.3, 0.3);
  // Rotated extent, kept inside the centre crop a network sees at test time.
  const double reach = radius * (std::cos(angle) + std::abs(std::sin(angle))) + size / 16.0 + 1;
  const double cx = uniform(rng, reach, size - reach);
  const double cy = uniform(rng, reach, size - reach);
  const double ca = std::cos(angle), sa = std::sin(angle);
  RasterImage img(size, size, 3);
  constexpr int kSub = 3;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double px = x + (sx + 0.5) / kSub - cx, py = y + (sy + 0.5) / kSub - cy;
          const double u = (ca * px + sa * py) / radius, v = (-sa * px + ca * py) / radius;
          hits += inside_shape(cls, u, v);
        }
      }
      const double t = hits / double(kSub * kSub);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = bg[c] + t * (fg[c] - bg[c]);
    }
  }
  return img;
}

SynthDataset generate(int train_count, int test_count, std::uint64_t seed, std::vector<std::string> classes,
                      const std::function<RasterImage(int, Rng&)>& make, double noise) {
  if (train_count < 0 || test_count < 0) throw UsageError("synth: counts must be non-negative");
  SynthDataset d;
  d.classes = std::move(classes);
  const int total = train_count + test_count;
  const int nc = static_cast<int>(d.classes.size());
  d.images.resize(total);
  d.labels.resize(total);
  d.splits.resize(total);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < total; ++i) {
    const bool train = i < train_count;
    const int local = train ? i : i - train_count;
    Rng rng(mix(seed, static_cast<std::uint64_t>(i)));
    d.labels[i] = local % nc;
    d.splits[i] = train ? "train" : "test";
    d.images[i] = make(d.labels[i], rng);
    add_noise(d.images[i], rng, noise);
  }
  return d;
}

}  // namespace

SynthDataset make_two_texture(int train_count, int test_count, std::uint64_t seed, int size) {
  if (size < 16) throw UsageError("synth: image size must be >= 16");
  return generate(train_count, test_count, seed, {"stripes", "blobs"},
                  [size](int cls, Rng& rng) { return cls == 0 ? stripes(size, rng) : blobs(size, rng); }, 0.05);
}

SynthDataset make_shapes(int train_count, int test_count, std::uint64_t seed, int size) {
  if (size < 16) throw UsageError("synth: image size must be >= 16");
  return generate(train_count, test_count, seed,
                  {"disc", "square", "triangle_up", "triangle_down", "plus", "saltire", "ring", "square_outline",
                   "bar_horizontal", "bar_vertical"},
                  [size](int cls, Rng& rng) { return shape(cls, size, rng); }, 0.06);
}

void write_dataset(const SynthDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  std::ofstream manifest(dir / "manifest.tsv");
  if (!manifest) throw DataError("synth: cannot write " + (dir / "manifest.tsv").string());
  manifest << "@classes\t";
  for (std::size_t c = 0; c < data.classes.size(); ++c) manifest << (c ? "," : "") << data.classes[c];
  manifest << "\n";
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.ppm", i);
    write_pnm(data.images[i], dir / "images" / name);
    manifest << "images/" << name << "\t" << data.splits[i] << "\t" << data.classes[data.labels[i]] << "\n";
  }
}

}  // namespace dvk::harness
