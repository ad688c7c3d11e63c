#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dvk::harness {

// One line per image, tab separated:
//   <path> <split> <label>[,<label>...]
// A label prefixed with "difficult:" is present but excluded from scoring.
// An optional first line "@classes <name>,<name>,..." fixes the class order;
// otherwise classes are sorted by name.
struct ManifestEntry {
  std::string path;
  std::string split;  // train, val or test
  std::vector<int> labels;
  std::vector<int> difficult;
  int line = 0;
};

struct DatasetManifest {
  std::vector<std::string> classes;
  std::vector<ManifestEntry> entries;
  std::filesystem::path root;  // directory relative paths resolve against

  std::vector<int> split_indices(const std::string& split) const;
  std::filesystem::path resolve(const ManifestEntry& e) const;
};

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& root = {});
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace dvk::harness
