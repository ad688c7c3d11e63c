#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dvk/descriptors.hpp"
#include "dvk/image.hpp"

using namespace dvk;

namespace {

RasterImage random_image(int w, int h, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RasterImage img(w, h, c);
  for (double& v : img.data) v = u(rng);
  return img;
}

}  // namespace

TEST(Grayscale, WhiteBlackAndRed) {
  for (double v : to_grayscale(RasterImage(4, 3, 3, 1.0)).data) EXPECT_NEAR(v, 1.0, 1e-15);
  EXPECT_EQ(to_grayscale(RasterImage(4, 3, 3, 0.0)).data, std::vector<double>(12, 0.0));
  RasterImage red(2, 2, 3, 0.0);
  for (int i = 0; i < 4; ++i) red.data[i * 3] = 1.0;
  for (double v : to_grayscale(red).data) EXPECT_NEAR(v, 0.299, 1e-15);
}

TEST(DenseSift, ConstantImageGivesZeroDescriptors) {
  const DescriptorSet d = extract_dense_sift(RasterImage(40, 40, 1, 0.6));
  ASSERT_FALSE(d.empty());
  for (double v : d.values) EXPECT_EQ(v, 0.0);
}

TEST(DenseSift, NonZeroDescriptorsHaveUnitNorm) {
  const DescriptorSet d = extract_dense_sift(random_image(48, 40, 1, 1));
  ASSERT_EQ(d.dim, kSiftDim);
  int nonzero = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double ss = 0;
    for (double v : d.row(i)) {
      EXPECT_GE(v, 0.0);
      ss += v * v;
    }
    if (ss > 0) {
      ++nonzero;
      EXPECT_NEAR(ss, 1.0, 1e-12);
    }
  }
  EXPECT_GT(nonzero, 0);
}

TEST(DenseSift, SiteCountMatchesGridEnumeration) {
  DenseSamplingParams p;
  p.num_scales = 1;
  p.upscale_factor = 1;
  p.base_patch = 24;
  p.stride = 3;
  const DescriptorSet d = extract_dense_sift(random_image(128, 128, 1, 2), p);
  int count = 0;
  for (int y = 0; y + 24 <= 128; y += 3)
    for (int x = 0; x + 24 <= 128; x += 3) ++count;
  EXPECT_EQ(static_cast<int>(d.size()), count);
}

TEST(DenseSift, MultiScaleCountIsSumOverScales) {
  DenseSamplingParams p;
  const RasterImage img = random_image(50, 37, 1, 3);
  const DescriptorSet d = extract_dense_sift(img, p);
  long expected = 0;
  for (int k = 0; k < p.num_scales; ++k) {
    const long side = std::lround(24 * std::pow(std::sqrt(2.0), k));
    long nx = 0, ny = 0;
    for (long x = 0; x + side <= 100; x += 3) ++nx;
    for (long y = 0; y + side <= 74; y += 3) ++ny;
    expected += nx * ny;
  }
  EXPECT_EQ(static_cast<long>(d.size()), expected);
}

TEST(Lcs, DimensionIs96) {
  const DescriptorSet d = extract_lcs(rgb_to_lab(random_image(40, 40, 3, 4)));
  ASSERT_FALSE(d.empty());
  EXPECT_EQ(d.dim, 96);
}

TEST(Lcs, ConstantColourGivesZeroVarianceAndConstantMeans) {
  RasterImage lab(30, 30, 3);
  for (std::size_t i = 0; i < lab.pixel_count(); ++i) {
    lab.data[i * 3] = 0.25;
    lab.data[i * 3 + 1] = 0.5;
    lab.data[i * 3 + 2] = 0.75;
  }
  const DescriptorSet d = extract_lcs(lab);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (int cell = 0; cell < 16; ++cell) {
      const auto r = d.row(i).subspan(cell * 6, 6);
      EXPECT_DOUBLE_EQ(r[0], 0.25);
      EXPECT_DOUBLE_EQ(r[1], 0.5);
      EXPECT_DOUBLE_EQ(r[2], 0.75);
      EXPECT_NEAR(r[3], 0.0, 1e-15);
      EXPECT_NEAR(r[4], 0.0, 1e-15);
      EXPECT_NEAR(r[5], 0.0, 1e-15);
    }
  }
}

TEST(Lcs, MatchesMomentOracleOnRandomPatch) {
  DenseSamplingParams p;
  p.num_scales = 1;
  p.upscale_factor = 1;
  p.stride = 100;
  const RasterImage lab = random_image(24, 24, 3, 5);
  const DescriptorSet d = extract_lcs(lab, p);
  ASSERT_EQ(d.size(), 1u);
  for (int by = 0; by < 4; ++by)
    for (int bx = 0; bx < 4; ++bx)
      for (int c = 0; c < 3; ++c) {
        long double s = 0, s2 = 0;
        for (int y = by * 6; y < by * 6 + 6; ++y)
          for (int x = bx * 6; x < bx * 6 + 6; ++x) {
            s += lab.at(x, y, c);
            s2 += static_cast<long double>(lab.at(x, y, c)) * lab.at(x, y, c);
          }
        const long double mean = s / 36, var = s2 / 36 - mean * mean;
        const int cell = (by * 4 + bx) * 6;
        EXPECT_NEAR(d.row(0)[cell + c], static_cast<double>(mean), 1e-12);
        EXPECT_NEAR(d.row(0)[cell + 3 + c], static_cast<double>(var), 1e-12);
      }
}

TEST(Lab, WhiteAndBlack) {
  const RasterImage white = rgb_to_lab(RasterImage(1, 1, 3, 1.0));
  EXPECT_NEAR(white.data[0], 1.0, 1e-4);
  EXPECT_NEAR(white.data[1], 128.0 / 255.0, 1e-4);
  EXPECT_NEAR(white.data[2], 128.0 / 255.0, 1e-4);
  EXPECT_NEAR(rgb_to_lab(RasterImage(1, 1, 3, 0.0)).data[0], 0.0, 1e-12);
}

TEST(Sampling, RejectsBadParameters) {
  DenseSamplingParams p;
  p.stride = 0;
  EXPECT_THROW(extract_dense_sift(RasterImage(30, 30, 1), p), std::exception);
  EXPECT_THROW(extract_lcs(RasterImage(30, 30, 1)), std::exception);
}
