#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dvk/image.hpp"

namespace dvk::harness {

struct SynthDataset {
  std::vector<std::string> classes;
  std::vector<RasterImage> images;
  std::vector<int> labels;
  std::vector<std::string> splits;  // "train" or "test"
};

// Two classes, oriented stripes vs scattered blobs, RGB with noise. Labels
// alternate so both splits are balanced.
SynthDataset make_two_texture(int train_count, int test_count, std::uint64_t seed, int size = 64);

// Ten filled or outlined shapes at random position, scale, rotation and colour.
SynthDataset make_shapes(int train_count, int test_count, std::uint64_t seed, int size = 64);

// Writes <dir>/images/NNNNN.ppm and <dir>/manifest.tsv.
void write_dataset(const SynthDataset& data, const std::filesystem::path& dir);

}  // namespace dvk::harness
