#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dvk/cnn/architecture.hpp"
#include "dvk/cnn/train.hpp"
#include "dvk/fisher.hpp"
#include "dvk/gmm.hpp"
#include "dvk/image.hpp"
#include "dvk/reduce.hpp"
#include "dvk/svm.hpp"

namespace dvk::harness {

// Feature files, little endian:
//   "DVK1" | version u32 = 1 | dim u32 | count u32 | dtype u8 (0 = f32) | payload | CRC32 u32
// The CRC covers every preceding byte.
inline constexpr std::uint32_t kFeatureFormatVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 17;

std::size_t feature_file_size(std::size_t dim, std::size_t count);
std::string encode_features(const std::vector<FeatureVector>& features);
/// Throws DataError on a bad magic, version, size or checksum.
std::vector<FeatureVector> decode_features(std::string_view bytes);

/// Values as stored: each component rounded to single precision.
FeatureVector round_to_storage(const FeatureVector& v);

std::string sha256_hex(std::string_view bytes);
std::string image_digest(const RasterImage& image);

// Content-addressed store under a root directory. Writes go to a temporary
// file that is renamed into place.
class FeatureCache {
 public:
  explicit FeatureCache(std::filesystem::path root);

  /// Nullopt on a miss; a corrupt entry is reported and treated as a miss.
  std::optional<std::vector<FeatureVector>> load(const std::string& key) const;
  void store(const std::string& key, const std::vector<FeatureVector>& features) const;
  std::filesystem::path path_for(const std::string& key) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

/// DVK_CACHE_DIR if set, otherwise `fallback`.
std::filesystem::path default_cache_root(const std::filesystem::path& fallback);

// Model files: "DVK1" | version u32 = 2 | section count u32 | table | payloads | CRC32.
// Table entries are (name length u16, name, offset u64, size u64) with
// offsets relative to the start of the file.
inline constexpr std::uint32_t kModelFormatVersion = 2;

class ModelContainer {
 public:
  void put(const std::string& name, std::string bytes) { sections_[name] = std::move(bytes); }
  bool has(const std::string& name) const { return sections_.count(name) > 0; }
  const std::string& get(const std::string& name) const;
  std::vector<std::string> names() const;

  std::string encode() const;
  static ModelContainer decode(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static ModelContainer load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> sections_;
};

std::string serialise(const PcaModel& model);
std::string serialise(const GmmModel& model);
std::string serialise(const LinearModel& model);
PcaModel deserialise_pca(std::string_view bytes);
GmmModel deserialise_gmm(std::string_view bytes);
LinearModel deserialise_linear(std::string_view bytes);

// CNNs occupy two sections: "cnn.manifest" (JSON layer list and input
// normalisation) and "cnn.params" (weights, biases, momentum buffers as f32).
void put_network(ModelContainer& container, const cnn::ArchitectureSpec& spec, const cnn::Network& state);
std::pair<cnn::ArchitectureSpec, cnn::Network> get_network(const ModelContainer& container);

std::string architecture_to_json(const cnn::ArchitectureSpec& spec);
cnn::ArchitectureSpec architecture_from_json(const std::string& text);

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace dvk::harness
