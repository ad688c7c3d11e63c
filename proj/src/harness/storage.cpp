#include "dvk/harness/storage.hpp"

#include <bit>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>
#include <sstream>
#include <thread>
#include <unistd.h>
#include <zlib.h>

#include "json.hpp"

#include "dvk/error.hpp"

namespace dvk::harness {

static_assert(std::endian::native == std::endian::little, "storage formats assume a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'V', 'K', '1'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out_.append(b, sizeof(T));
  }
  void bytes(std::string_view s) { out_.append(s); }
  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void doubles(const std::vector<double>& v) {
    put<std::uint64_t>(v.size());
    for (double x : v) put(x);
  }
  std::string& data() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in, std::string what) : in_(in), what_(std::move(what)) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    const std::string_view s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return std::string(bytes(get<std::uint32_t>())); }
  std::vector<double> doubles() {
    const auto n = get<std::uint64_t>();
    need(n * sizeof(double));
    std::vector<double> v(n);
    for (auto& x : v) x = get<double>();
    return v;
  }
  void expect_end() const {
    if (pos_ != in_.size()) throw DataError(what_ + ": trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DataError(what_ + ": truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::uint32_t crc32_of(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

void check_trailer(std::string_view bytes, const std::string& what) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw DataError(what + ": bad magic");
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (stored != crc32_of(bytes.substr(0, bytes.size() - 4))) throw DataError(what + ": checksum mismatch");
}

}  // namespace

std::size_t feature_file_size(std::size_t dim, std::size_t count) {
  return kFeatureHeaderBytes + dim * count * sizeof(float) + 4;
}

FeatureVector round_to_storage(const FeatureVector& v) {
  FeatureVector out = v;
  for (double& x : out.values) x = static_cast<double>(static_cast<float>(x));
  return out;
}

std::string encode_features(const std::vector<FeatureVector>& features) {
  const std::size_t dim = features.empty() ? 0 : features.front().dim();
  Writer w;
  w.bytes(std::string_view(kMagic, 4));
  w.put<std::uint32_t>(kFeatureFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(features.size()));
  w.put<std::uint8_t>(0);
  for (const FeatureVector& f : features) {
    if (f.dim() != dim) throw DataError("encode_features: mixed dimensions");
    for (double x : f.values) w.put(static_cast<float>(x));
  }
  w.put(crc32_of(w.data()));
  return std::move(w.data());
}

std::vector<FeatureVector> decode_features(std::string_view bytes) {
  check_trailer(bytes, "feature file");
  Reader r(bytes.substr(0, bytes.size() - 4), "feature file");
  r.bytes(4);
  if (r.get<std::uint32_t>() != kFeatureFormatVersion) throw DataError("feature file: unsupported version");
  const auto dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint32_t>();
  if (r.get<std::uint8_t>() != 0) throw DataError("feature file: unsupported dtype");
  if (bytes.size() != feature_file_size(dim, count)) throw DataError("feature file: size does not match header");
  std::vector<FeatureVector> out(count);
  for (auto& f : out) {
    f.values.resize(dim);
    for (auto& x : f.values) x = r.get<float>();
  }
  r.expect_end();
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string image_digest(const RasterImage& image) {
  Writer w;
  w.put<std::int32_t>(image.width);
  w.put<std::int32_t>(image.height);
  w.put<std::int32_t>(image.channels);
  for (double v : image.data) w.put(v);
  return sha256_hex(w.data());
}

FeatureCache::FeatureCache(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path FeatureCache::path_for(const std::string& key) const {
  return root_ / key.substr(0, 2) / (key + ".dvkf");
}

std::optional<std::vector<FeatureVector>> FeatureCache::load(const std::string& key) const {
  const auto p = path_for(key);
  std::error_code ec;
  if (!std::filesystem::exists(p, ec)) return std::nullopt;
  try {
    return decode_features(read_file(p));
  } catch (const DataError& e) {
    spdlog::warn("feature cache entry {} unusable ({}), recomputing", p.string(), e.what());
    return std::nullopt;
  }
}

void FeatureCache::store(const std::string& key, const std::vector<FeatureVector>& features) const {
  write_atomic(path_for(key), encode_features(features));
}

std::filesystem::path default_cache_root(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("DVK_CACHE_DIR"); env && *env) return env;
  return fallback;
}

const std::string& ModelContainer::get(const std::string& name) const {
  const auto it = sections_.find(name);
  if (it == sections_.end()) throw DataError("model file has no '" + name + "' section");
  return it->second;
}

std::vector<std::string> ModelContainer::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : sections_) out.push_back(k);
  return out;
}

std::string ModelContainer::encode() const {
  std::size_t table = 0;
  for (const auto& [name, data] : sections_) table += 2 + name.size() + 16;
  std::uint64_t offset = 12 + table;
  Writer w;
  w.bytes(std::string_view(kMagic, 4));
  w.put<std::uint32_t>(kModelFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sections_.size()));
  for (const auto& [name, data] : sections_) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.put<std::uint64_t>(offset);
    w.put<std::uint64_t>(data.size());
    offset += data.size();
  }
  for (const auto& [name, data] : sections_) w.bytes(data);
  w.put(crc32_of(w.data()));
  return std::move(w.data());
}

ModelContainer ModelContainer::decode(std::string_view bytes) {
  check_trailer(bytes, "model file");
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  Reader r(body, "model file");
  r.bytes(4);
  if (r.get<std::uint32_t>() != kModelFormatVersion) throw DataError("model file: unsupported version");
  const auto count = r.get<std::uint32_t>();
  ModelContainer c;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name(r.bytes(r.get<std::uint16_t>()));
    const auto offset = r.get<std::uint64_t>();
    const auto size = r.get<std::uint64_t>();
    if (offset > body.size() || size > body.size() - offset) throw DataError("model file: section out of range");
    c.sections_[name] = std::string(body.substr(offset, size));
  }
  return c;
}

void ModelContainer::save(const std::filesystem::path& path) const { write_atomic(path, encode()); }

ModelContainer ModelContainer::load(const std::filesystem::path& path) { return decode(read_file(path)); }

std::string serialise(const PcaModel& m) {
  Writer w;
  w.put<std::int32_t>(m.input_dim);
  w.put<std::int32_t>(m.target_dim);
  w.doubles(m.mean);
  w.doubles(m.basis);
  w.doubles(m.eigenvalues);
  w.put<std::uint8_t>(m.rank_deficient);
  return std::move(w.data());
}

PcaModel deserialise_pca(std::string_view bytes) {
  Reader r(bytes, "pca section");
  PcaModel m;
  m.input_dim = r.get<std::int32_t>();
  m.target_dim = r.get<std::int32_t>();
  m.mean = r.doubles();
  m.basis = r.doubles();
  m.eigenvalues = r.doubles();
  m.rank_deficient = r.get<std::uint8_t>() != 0;
  r.expect_end();
  return m;
}

std::string serialise(const GmmModel& m) {
  Writer w;
  w.put<std::int32_t>(m.components);
  w.put<std::int32_t>(m.dim);
  w.doubles(m.means);
  w.doubles(m.variances);
  w.doubles(m.weights);
  return std::move(w.data());
}

GmmModel deserialise_gmm(std::string_view bytes) {
  Reader r(bytes, "gmm section");
  GmmModel m;
  m.components = r.get<std::int32_t>();
  m.dim = r.get<std::int32_t>();
  m.means = r.doubles();
  m.variances = r.doubles();
  m.weights = r.doubles();
  r.expect_end();
  m.validate();
  return m;
}

std::string serialise(const LinearModel& m) {
  Writer w;
  w.put<std::int32_t>(m.feature_dim);
  w.put(m.c);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.classes.size()));
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    w.str(m.classes[c]);
    w.doubles(m.weights[c]);
    w.put(m.bias[c]);
    w.put<std::uint8_t>(m.trained[c]);
  }
  return std::move(w.data());
}

LinearModel deserialise_linear(std::string_view bytes) {
  Reader r(bytes, "svm section");
  LinearModel m;
  m.feature_dim = r.get<std::int32_t>();
  m.c = r.get<double>();
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t c = 0; c < n; ++c) {
    m.classes.push_back(r.str());
    m.weights.push_back(r.doubles());
    m.bias.push_back(r.get<double>());
    m.trained.push_back(r.get<std::uint8_t>() != 0);
  }
  r.expect_end();
  return m;
}

std::string architecture_to_json(const cnn::ArchitectureSpec& spec) {
  using nlohmann::json;
  json j;
  j["name"] = spec.name;
  j["input"] = {spec.input.height, spec.input.width, spec.input.channels};
  j["num_classes"] = spec.num_classes;
  j["layers"] = json::array();
  for (const auto& l : spec.layers) {
    json e{{"kind", std::string(cnn::to_string(l.kind))}, {"name", l.name}};
    switch (l.kind) {
      case cnn::LayerKind::kConv:
        e["filters"] = l.filters;
        e["kernel"] = l.kernel;
        e["stride"] = l.stride;
        e["pad"] = l.pad;
        break;
      case cnn::LayerKind::kMaxPool:
        e["window"] = l.kernel;
        e["stride"] = l.stride;
        e["pad"] = l.pad;
        break;
      case cnn::LayerKind::kFullyConnected:
        e["out_dim"] = l.out_dim;
        break;
      case cnn::LayerKind::kDropout:
        e["rate"] = l.rate;
        break;
      case cnn::LayerKind::kLrn:
        e["size"] = l.lrn.size;
        e["alpha"] = l.lrn.alpha;
        e["beta"] = l.lrn.beta;
        e["bias"] = l.lrn.bias;
        break;
      default:
        break;
    }
    j["layers"].push_back(e);
  }
  return j.dump(1);
}

cnn::ArchitectureSpec architecture_from_json(const std::string& text) {
  using nlohmann::json;
  try {
    const json j = json::parse(text);
    cnn::ArchitectureSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.input = {j.at("input").at(0).get<int>(), j.at("input").at(1).get<int>(), j.at("input").at(2).get<int>()};
    spec.num_classes = j.at("num_classes").get<int>();
    for (const json& e : j.at("layers")) {
      const std::string kind = e.at("kind").get<std::string>();
      const std::string name = e.at("name").get<std::string>();
      if (kind == "conv") {
        spec.layers.push_back(cnn::LayerSpec::conv(name, e.at("filters"), e.at("kernel"), e.at("stride"), e.at("pad")));
      } else if (kind == "relu") {
        spec.layers.push_back(cnn::LayerSpec::relu(name));
      } else if (kind == "lrn") {
        spec.layers.push_back(cnn::LayerSpec::lrn_layer(
            name, {e.at("size").get<int>(), e.at("alpha").get<double>(), e.at("beta").get<double>(),
                   e.at("bias").get<double>()}));
      } else if (kind == "maxpool") {
        auto l = cnn::LayerSpec::max_pool(name, e.at("window"), e.at("stride"));
        l.pad = e.at("pad");
        spec.layers.push_back(l);
      } else if (kind == "fully_connected") {
        spec.layers.push_back(cnn::LayerSpec::fully_connected(name, e.at("out_dim")));
      } else if (kind == "dropout") {
        spec.layers.push_back(cnn::LayerSpec::dropout(name, e.at("rate")));
      } else if (kind == "softmax") {
        spec.layers.push_back(cnn::LayerSpec::softmax(name));
      } else {
        throw DataError("cnn manifest: unknown layer kind '" + kind + "'");
      }
      spec.layers.back().validate();
    }
    return spec;
  } catch (const json::exception& e) {
    throw DataError(std::string("cnn manifest: ") + e.what());
  }
}

void put_network(ModelContainer& container, const cnn::ArchitectureSpec& spec, const cnn::Network& state) {
  if (!state.matches(spec)) throw DataError("put_network: state does not match " + spec.name);
  nlohmann::json meta = nlohmann::json::parse(architecture_to_json(spec));
  meta["input_scale"] = state.input_scale;
  meta["input_mean"] = std::vector<double>(state.input_mean.begin(), state.input_mean.end());
  meta["mode"] = state.mode == cnn::Mode::kEval ? "eval" : "train";
  meta["learning_rate"] = state.schedule.learning_rate;
  container.put("cnn.manifest", meta.dump(1));

  Writer w;
  const auto floats = [&](const std::vector<float>& v) {
    w.put<std::uint64_t>(v.size());
    for (float x : v) w.put(x);
  };
  for (const auto& p : state.layers) {
    floats(p.weights);
    floats(p.bias);
    floats(p.weight_momentum);
    floats(p.bias_momentum);
  }
  container.put("cnn.params", std::move(w.data()));
}

std::pair<cnn::ArchitectureSpec, cnn::Network> get_network(const ModelContainer& container) {
  const std::string& text = container.get("cnn.manifest");
  cnn::ArchitectureSpec spec = architecture_from_json(text);
  cnn::Network state;
  try {
    const nlohmann::json meta = nlohmann::json::parse(text);
    state.input_scale = meta.at("input_scale").get<double>();
    for (double m : meta.at("input_mean")) state.input_mean.push_back(static_cast<float>(m));
    state.mode = meta.at("mode").get<std::string>() == "eval" ? cnn::Mode::kEval : cnn::Mode::kTrain;
    state.schedule.learning_rate = meta.at("learning_rate").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("cnn manifest: ") + e.what());
  }
  Reader r(container.get("cnn.params"), "cnn.params section");
  const auto floats = [&] {
    const auto n = r.get<std::uint64_t>();
    std::vector<float> v;
    v.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) v.push_back(r.get<float>());
    return v;
  };
  state.layers.resize(spec.layers.size());
  for (auto& p : state.layers) {
    p.weights = floats();
    p.bias = floats();
    p.weight_momentum = floats();
    p.bias_momentum = floats();
  }
  r.expect_end();
  if (!state.matches(spec)) throw DataError("model file: CNN parameters do not match the layer manifest");
  return {std::move(spec), std::move(state)};
}

void write_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace dvk::harness
