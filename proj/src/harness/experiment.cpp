#include "dvk/harness/experiment.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <spdlog/spdlog.h>
#include <sstream>

#include "dvk/cnn/train.hpp"
#include "dvk/error.hpp"
#include "dvk/harness/manifest.hpp"
#include "dvk/harness/storage.hpp"
#include "dvk/reduce.hpp"

namespace dvk::harness {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Runs fn(i) for i in [0, n) on the OpenMP pool. The exception of the lowest
// failing index is rethrown, so errors do not depend on scheduling.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"experiment", {"name", "manifest", "seed", "cache_dir"}},
      {"representation", {"kind"}},
      {"ifv",
       {"descriptor", "components", "pca_dim", "normalisation", "spatial", "max_descriptors", "gmm_iterations",
        "stride", "scales"}},
      {"cnn", {"model", "architecture", "l2_normalise"}},
      {"augment", {"kind", "fusion_train", "fusion_test", "target"}},
      {"svm", {"c_grid", "metric", "tol", "max_epochs", "val_fraction"}},
      {"eval", {"top_k", "ap"}},
  };
  return keys;
}

template <typename T>
T get(const boost::property_tree::ptree& pt, const std::string& key, T fallback) {
  try {
    return pt.get<T>(key, fallback);
  } catch (const boost::property_tree::ptree_error& e) {
    throw UsageError("config: bad value for " + key + ": " + e.what());
  }
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw UsageError("config: expected a boolean, got '" + s + "'");
}

std::string to_string(SpatialScheme s) {
  switch (s) {
    case SpatialScheme::kNone: return "none";
    case SpatialScheme::kPyramid: return "spm";
    case SpatialScheme::kExtended: return "xy";
  }
  return "?";
}

std::string to_string(RepresentationKind k) {
  switch (k) {
    case RepresentationKind::kIfv: return "ifv";
    case RepresentationKind::kCnn: return "cnn";
    case RepresentationKind::kStack: return "stack";
  }
  return "?";
}

std::string fusion_code(Fusion f) {
  switch (f) {
    case Fusion::kSamples: return "f";
    case Fusion::kSum: return "s";
    case Fusion::kMax: return "m";
    case Fusion::kStack: return "t";
  }
  return "?";
}

bool uses_ifv(const ExperimentConfig& c) { return c.kind != RepresentationKind::kCnn; }
bool uses_cnn(const ExperimentConfig& c) { return c.kind != RepresentationKind::kIfv; }

void validate(const ExperimentConfig& c) {
  const auto& d = c.ifv.descriptor;
  if (d != "sift" && d != "lcs" && d != "sift+lcs") throw UsageError("config: ifv.descriptor must be sift, lcs or sift+lcs");
  if (c.ifv.components < 1 || c.ifv.pca_dim < 1) throw UsageError("config: ifv components and pca_dim must be >= 1");
  if ((c.augment.fusion_train == Fusion::kStack) != (c.augment.fusion_test == Fusion::kStack)) {
    throw UsageError("config: stack fusion must be used for both training and testing");
  }
  if (c.c_grid.empty()) throw UsageError("config: empty svm.c_grid");
  for (double v : c.c_grid) {
    if (!(v > 0)) throw UsageError("config: svm.c_grid values must be positive");
  }
  if (c.val_fraction <= 0 || c.val_fraction >= 1) throw UsageError("config: svm.val_fraction must lie in (0, 1)");
  if (c.target < 1) throw UsageError("config: augment.target must be positive");
  c.ifv.sampling.validate();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  boost::property_tree::ptree pt;
  try {
    std::istringstream in(text);
    boost::property_tree::ini_parser::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : pt) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) throw UsageError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw UsageError("config: unknown key '" + key + "' in [" + section + "]");
    }
  }
  const auto path_of = [&](const std::string& p) -> std::filesystem::path {
    if (p.empty()) return {};
    const std::filesystem::path fp(p);
    return fp.is_absolute() || base_dir.empty() ? fp : base_dir / fp;
  };

  ExperimentConfig c;
  c.name = get<std::string>(pt, "experiment.name", c.name);
  c.manifest = path_of(get<std::string>(pt, "experiment.manifest", ""));
  c.seed = get<std::uint64_t>(pt, "experiment.seed", c.seed);
  c.cache_dir = path_of(get<std::string>(pt, "experiment.cache_dir", ""));

  const std::string kind = get<std::string>(pt, "representation.kind", "ifv");
  if (kind == "ifv") c.kind = RepresentationKind::kIfv;
  else if (kind == "cnn") c.kind = RepresentationKind::kCnn;
  else if (kind == "stack") c.kind = RepresentationKind::kStack;
  else throw UsageError("config: representation.kind must be ifv, cnn or stack");

  IfvSettings& f = c.ifv;
  f.descriptor = get<std::string>(pt, "ifv.descriptor", f.descriptor);
  f.components = get<int>(pt, "ifv.components", f.components);
  f.pca_dim = get<int>(pt, "ifv.pca_dim", f.pca_dim);
  const std::string norm = get<std::string>(pt, "ifv.normalisation", "intra");
  if (norm == "intra") f.normalisation = FisherNormalisation::kIntraNormSingleSqrt;
  else if (norm == "classic") f.normalisation = FisherNormalisation::kClassicDoubleSqrt;
  else throw UsageError("config: ifv.normalisation must be classic or intra");
  const std::string spatial = get<std::string>(pt, "ifv.spatial", "none");
  if (spatial == "none") f.spatial = SpatialScheme::kNone;
  else if (spatial == "spm") f.spatial = SpatialScheme::kPyramid;
  else if (spatial == "xy") f.spatial = SpatialScheme::kExtended;
  else throw UsageError("config: ifv.spatial must be none, spm or xy");
  f.max_descriptors = get<std::size_t>(pt, "ifv.max_descriptors", f.max_descriptors);
  f.gmm_iterations = get<int>(pt, "ifv.gmm_iterations", f.gmm_iterations);
  f.sampling.stride = get<int>(pt, "ifv.stride", f.sampling.stride);
  f.sampling.num_scales = get<int>(pt, "ifv.scales", f.sampling.num_scales);

  c.cnn.model = path_of(get<std::string>(pt, "cnn.model", ""));
  c.cnn.architecture = get<std::string>(pt, "cnn.architecture", c.cnn.architecture);
  c.cnn.l2_normalise = parse_bool(get<std::string>(pt, "cnn.l2_normalise", "true"));

  try {
    c.augment.kind = parse_augment_kind(get<std::string>(pt, "augment.kind", "none"));
    c.augment.fusion_train = parse_fusion(get<std::string>(pt, "augment.fusion_train", "f"));
    c.augment.fusion_test = parse_fusion(get<std::string>(pt, "augment.fusion_test", "s"));
  } catch (const DataError& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  c.target = get<int>(pt, "augment.target", c.target);

  if (const auto grid = pt.get_optional<std::string>("svm.c_grid")) {
    c.c_grid.clear();
    std::istringstream in(*grid);
    std::string item;
    while (std::getline(in, item, ',')) {
      try {
        c.c_grid.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw UsageError("config: bad svm.c_grid entry '" + item + "'");
      }
    }
  }
  const std::string metric = get<std::string>(pt, "svm.metric", "map");
  if (metric == "map") c.metric = SelectionMetric::kMap;
  else if (metric == "accuracy") c.metric = SelectionMetric::kAccuracy;
  else throw UsageError("config: svm.metric must be map or accuracy");
  c.svm.tol = get<double>(pt, "svm.tol", c.svm.tol);
  c.svm.max_epochs = get<int>(pt, "svm.max_epochs", c.svm.max_epochs);
  c.svm.seed = c.seed;
  c.val_fraction = get<double>(pt, "svm.val_fraction", c.val_fraction);
  c.top_k = get<int>(pt, "eval.top_k", c.top_k);
  const std::string ap = get<std::string>(pt, "eval.ap", "integral");
  if (ap == "integral") c.ap_mode = ApMode::kIntegral;
  else if (ap == "11pt") c.ap_mode = ApMode::kElevenPoint;
  else throw UsageError("config: eval.ap must be integral or 11pt");
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError&) {
    throw UsageError("cannot read config " + path.string());
  }
  return parse_config(text, path.parent_path());
}

std::string describe(const ExperimentConfig& c) {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(c.seed);
  kv["representation"] = to_string(c.kind);
  if (uses_ifv(c)) {
    kv["ifv.descriptor"] = c.ifv.descriptor;
    kv["ifv.components"] = std::to_string(c.ifv.components);
    kv["ifv.pca_dim"] = std::to_string(c.ifv.pca_dim);
    kv["ifv.normalisation"] =
        c.ifv.normalisation == FisherNormalisation::kIntraNormSingleSqrt ? "intra" : "classic";
    kv["ifv.spatial"] = to_string(c.ifv.spatial);
    kv["ifv.max_descriptors"] = std::to_string(c.ifv.max_descriptors);
    kv["ifv.gmm_iterations"] = std::to_string(c.ifv.gmm_iterations);
    kv["ifv.stride"] = std::to_string(c.ifv.sampling.stride);
    kv["ifv.scales"] = std::to_string(c.ifv.sampling.num_scales);
  }
  if (uses_cnn(c)) {
    kv["cnn.model"] = c.cnn.model.filename().string();
    kv["cnn.l2_normalise"] = c.cnn.l2_normalise ? "true" : "false";
  }
  kv["augment.kind"] = std::string(to_string(c.augment.kind));
  kv["augment.fusion_train"] = fusion_code(c.augment.fusion_train);
  kv["augment.fusion_test"] = fusion_code(c.augment.fusion_test);
  kv["augment.target"] = std::to_string(c.target);
  std::string grid;
  for (double v : c.c_grid) grid += (grid.empty() ? "" : ",") + num(v);
  kv["svm.c_grid"] = grid;
  kv["svm.metric"] = c.metric == SelectionMetric::kMap ? "map" : "accuracy";
  kv["svm.tol"] = num(c.svm.tol);
  kv["svm.max_epochs"] = std::to_string(c.svm.max_epochs);
  kv["svm.val_fraction"] = num(c.val_fraction);
  kv["eval.top_k"] = std::to_string(c.top_k);
  kv["eval.ap"] = c.ap_mode == ApMode::kIntegral ? "integral" : "11pt";
  std::string out;
  for (const auto& [k, v] : kv) out += (out.empty() ? "" : ";") + k + "=" + v;
  return out;
}

FisherConfig fisher_config(const IfvSettings& ifv) {
  FisherConfig f;
  f.normalisation = ifv.normalisation;
  f.spatial = ifv.spatial;
  f.components = ifv.components;
  f.dim = ifv.pca_dim + (ifv.spatial == SpatialScheme::kExtended ? 2 : 0);
  return f;
}

long long representation_dim(const ExperimentConfig& config, const cnn::ArchitectureSpec* cnn_spec) {
  long long dim = 0;
  if (uses_ifv(config)) dim += fv_dimension(fisher_config(config.ifv), config.ifv.descriptor == "sift+lcs");
  if (uses_cnn(config)) {
    dim += cnn_spec ? cnn_spec->feature_dim() : cnn::build_architecture(config.cnn.architecture).feature_dim();
  }
  if (config.augment.fusion_test == Fusion::kStack) dim *= sample_count(config.augment.kind);
  return dim;
}

std::string ResultRow::header() {
  return "experiment\tmethod\tspool\taug\tdim\tc\tmap\taccuracy\ttop_k\ttop_k_error\tmean_class_accuracy\t"
         "num_test\tsettings";
}

std::string ResultRow::format() const {
  std::ostringstream out;
  out << experiment << '\t' << method << '\t' << spool << '\t' << aug << '\t' << dim << '\t' << num(c) << '\t'
      << num(eval.map) << '\t' << num(eval.accuracy) << '\t' << eval.top_k << '\t' << num(eval.top_k_error) << '\t'
      << num(eval.mean_class_accuracy) << '\t' << eval.num_samples << '\t' << settings;
  return out.str();
}

DescriptorSet extract_descriptors(const std::string& descriptor, const RasterImage& image,
                                  const DenseSamplingParams& sampling) {
  if (descriptor == "sift") return extract_dense_sift(to_grayscale(image), sampling);
  if (descriptor != "lcs") throw UsageError("unknown descriptor '" + descriptor + "'");
  if (image.channels != 3) throw DataError("colour descriptors need RGB images");
  return extract_lcs(rgb_to_lab(image), sampling);
}

std::vector<DescriptorSet> sample_descriptors(const std::string& descriptor,
                                              const std::vector<const RasterImage*>& images, const IfvSettings& ifv,
                                              std::uint64_t seed) {
  const int n = static_cast<int>(images.size());
  if (n == 0) throw DataError("no training images for the encoder");
  const std::size_t quota = std::max<std::size_t>(1, (ifv.max_descriptors + n - 1) / n);
  std::vector<DescriptorSet> sampled(n);
  parallel_for(n, [&](int i) {
    const DescriptorSet all = extract_descriptors(descriptor, *images[i], ifv.sampling);
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    if (all.size() > quota) {
      std::mt19937_64 rng(mix(seed, static_cast<std::uint64_t>(i)));
      std::shuffle(order.begin(), order.end(), rng);
      order.resize(quota);
      std::sort(order.begin(), order.end());
    }
    DescriptorSet keep(all.dim);
    for (std::size_t k : order) keep.push_back(all.row(k), all.sites[k]);
    sampled[i] = std::move(keep);
  });
  return sampled;
}

IfvChannel fit_channel(const std::string& descriptor, const FisherConfig& fisher,
                       const std::vector<DescriptorSet>& sampled, const std::vector<const RasterImage*>& images,
                       const IfvSettings& ifv, std::uint64_t seed) {
  if (sampled.empty() || sampled.size() != images.size()) throw DataError("descriptor samples do not match images");
  DescriptorSet pool(sampled.front().dim);
  for (const auto& s : sampled) pool.append(s);

  IfvChannel ch;
  ch.descriptor = descriptor;
  ch.fisher = fisher;
  const bool extended = fisher.spatial == SpatialScheme::kExtended;
  PcaOptions po;
  po.seed = mix(seed, 1);
  po.max_samples = ifv.max_descriptors;
  ch.pca = fit_pca(pool, fisher.dim - (extended ? 2 : 0), po);

  DescriptorSet gmm_data(fisher.dim);
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    DescriptorSet p = apply_pca(ch.pca, sampled[i]);
    if (extended) p = spatially_extend(p, images[i]->width, images[i]->height);
    gmm_data.append(p);
  }
  GmmOptions go;
  go.max_iters = ifv.gmm_iterations;
  ch.gmm = fit_gmm(gmm_data, fisher.components, mix(seed, 2), go);
  return ch;
}

FeatureVector encode_ifv(const std::vector<IfvChannel>& channels, const RasterImage& image,
                         const DenseSamplingParams& sampling) {
  FeatureVector out;
  for (const IfvChannel& ch : channels) {
    const DescriptorSet proj = apply_pca(ch.pca, extract_descriptors(ch.descriptor, image, sampling));
    const FeatureVector fv =
        encode_spatial(ch.gmm, proj, ch.fisher, image.width, image.height, kernels::Backend::kSerial);
    out.values.insert(out.values.end(), fv.values.begin(), fv.values.end());
  }
  if (channels.size() > 1) l2_normalise(out.values);
  out.l2_normalised = true;
  out.provenance = "ifv";
  return out;
}

namespace {

struct Labelled {
  std::vector<std::vector<FeatureVector>> samples;  // per image, before fusion
  std::vector<std::vector<int>> labels;
  std::vector<std::vector<int>> difficult;
};

// Rows for the SVM: pooled fusion gives one row per image, kSamples one row
// per sample with `group` naming the source image.
struct Rows {
  FeatureMatrix x;
  std::vector<std::vector<int>> labels;
  std::vector<std::vector<int>> difficult;
  std::vector<int> group;
  int images = 0;
};

Rows make_rows(const Labelled& data, const std::vector<int>& which, Fusion fusion) {
  std::vector<FeatureVector> feats;
  Rows r;
  r.images = static_cast<int>(which.size());
  for (int g = 0; g < r.images; ++g) {
    const int i = which[g];
    for (FeatureVector& f : fuse(data.samples[i], fusion)) {
      feats.push_back(std::move(f));
      r.labels.push_back(data.labels[i]);
      r.difficult.push_back(data.difficult[i]);
      r.group.push_back(g);
    }
  }
  r.x = FeatureMatrix::from_features(feats);
  return r;
}

std::vector<double> image_scores(const LinearModel& model, const Rows& rows) {
  const int nc = static_cast<int>(model.classes.size());
  return mean_group_scores(scores(model, rows.x), nc, rows.group, rows.images);
}

std::vector<std::vector<int>> pick(const std::vector<std::vector<int>>& v, const std::vector<int>& which) {
  std::vector<std::vector<int>> out;
  for (int i : which) out.push_back(v[i]);
  return out;
}

std::string method_tag(const ExperimentConfig& c, const std::string& cnn_name) {
  std::string ifv;
  if (uses_ifv(c)) {
    ifv = "FK";
    if (c.ifv.normalisation == FisherNormalisation::kIntraNormSingleSqrt) ifv += " IN";
    if (c.ifv.descriptor == "lcs") ifv += " COL";
    if (c.ifv.descriptor == "sift+lcs") ifv += " COL+";
    ifv += " K=" + std::to_string(c.ifv.components);
  }
  switch (c.kind) {
    case RepresentationKind::kIfv: return ifv;
    case RepresentationKind::kCnn: return cnn_name;
    case RepresentationKind::kStack: return ifv + "+" + cnn_name;
  }
  return "?";
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate(config);
  std::vector<std::string> missing;
  if (config.manifest.empty() || !std::filesystem::exists(config.manifest)) {
    missing.push_back("manifest '" + config.manifest.string() + "'");
  }
  if (uses_cnn(config) && (config.cnn.model.empty() || !std::filesystem::exists(config.cnn.model))) {
    missing.push_back("cnn model '" + config.cnn.model.string() + "'");
  }
  if (!missing.empty()) {
    std::string msg = "missing prerequisite";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }

  const DatasetManifest manifest = load_manifest(config.manifest);
  const int n = static_cast<int>(manifest.entries.size());
  std::vector<RasterImage> images(n);
  parallel_for(n, [&](int i) { images[i] = read_pnm(manifest.resolve(manifest.entries[i])); });

  std::vector<int> train = manifest.split_indices("train");
  std::vector<int> val = manifest.split_indices("val");
  const std::vector<int> test = manifest.split_indices("test");
  if (train.empty() || test.empty()) throw DataError("manifest needs both train and test entries");

  // Encoders.
  std::vector<IfvChannel> channels;
  if (uses_ifv(config)) {
    // Encoders are fitted on the training split only (val stays unseen).
    std::vector<const RasterImage*> fit_images;
    for (int i : train) fit_images.push_back(&images[i]);
    const auto fit = [&](const std::string& descriptor, const FisherConfig& fisher, std::uint64_t seed) {
      const auto sampled = sample_descriptors(descriptor, fit_images, config.ifv, seed);
      channels.push_back(fit_channel(descriptor, fisher, sampled, fit_images, config.ifv, seed));
    };
    const FisherConfig fisher = fisher_config(config.ifv);
    if (config.ifv.descriptor == "sift" || config.ifv.descriptor == "sift+lcs") fit("sift", fisher, config.seed);
    if (config.ifv.descriptor == "lcs") {
      fit("lcs", fisher, mix(config.seed, 7));
    } else if (config.ifv.descriptor == "sift+lcs") {
      FisherConfig colour = fisher;
      colour.spatial = SpatialScheme::kNone;
      colour.dim = kColourPcaDim;
      fit("lcs", colour, mix(config.seed, 7));
    }
  }
  cnn::ArchitectureSpec spec;
  cnn::Network net;
  std::string cnn_digest;
  if (uses_cnn(config)) {
    const ModelContainer container = ModelContainer::load(config.cnn.model);
    std::tie(spec, net) = get_network(container);
    net.mode = cnn::Mode::kEval;
    cnn_digest = sha256_hex(container.get("cnn.manifest") + container.get("cnn.params"));
  }

  // Features per image and sample, through the cache when enabled.
  std::string encoder_digest = describe(config) + "|" + cnn_digest;
  for (const IfvChannel& ch : channels) {
    encoder_digest += "|" + sha256_hex(serialise(ch.pca)) + sha256_hex(serialise(ch.gmm));
  }
  encoder_digest = sha256_hex(encoder_digest);
  std::optional<FeatureCache> cache;
  if (!config.cache_dir.empty()) cache.emplace(config.cache_dir);

  Labelled data;
  data.samples.resize(n);
  for (const auto& e : manifest.entries) {
    data.labels.push_back(e.labels);
    data.difficult.push_back(e.difficult);
  }
  parallel_for(n, [&](int i) {
    std::string key;
    if (cache) {
      key = sha256_hex(encoder_digest + image_digest(images[i]));
      if (auto hit = cache->load(key)) {
        data.samples[i] = std::move(*hit);
        return;
      }
    }
    std::vector<FeatureVector> feats;
    if (uses_ifv(config)) {
      for (const RasterImage& s : generate_samples(images[i], config.augment.kind, config.target, false)) {
        feats.push_back(encode_ifv(channels, s, config.ifv.sampling));
      }
    }
    if (uses_cnn(config)) {
      const auto samples = generate_samples(images[i], config.augment.kind, spec.input.width, true);
      auto cnn_feats = cnn::extract_features(net, spec, samples, config.cnn.l2_normalise, kernels::Backend::kSerial);
      if (feats.empty()) {
        feats = std::move(cnn_feats);
      } else {
        for (std::size_t k = 0; k < feats.size(); ++k) {
          feats[k].values.insert(feats[k].values.end(), cnn_feats[k].values.begin(), cnn_feats[k].values.end());
          l2_normalise(feats[k].values);
        }
      }
    }
    // Stored precision, so cached and fresh runs agree bit for bit.
    for (auto& f : feats) f = round_to_storage(f);
    if (cache) cache->store(key, feats);
    data.samples[i] = std::move(feats);
  });

  // Validation split for C selection.
  bool held_out = false;
  if (val.empty()) {
    std::vector<int> order = train;
    std::mt19937_64 rng(mix(config.seed, 3));
    std::shuffle(order.begin(), order.end(), rng);
    const int nv = std::max(1, static_cast<int>(std::lround(config.val_fraction * order.size())));
    if (nv >= static_cast<int>(order.size())) throw DataError("too few training images to hold out a validation set");
    val.assign(order.begin(), order.begin() + nv);
    train.assign(order.begin() + nv, order.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
    held_out = true;
  }

  const Rows train_rows = make_rows(data, train, config.augment.fusion_train);
  const Rows val_rows = make_rows(data, val, config.augment.fusion_test);
  SvmOptions svm = config.svm;
  svm.seed = config.seed;
  std::vector<double> grid = config.c_grid;
  std::sort(grid.begin(), grid.end());
  double best_c = grid.front(), best_metric = -1;
  for (double c : grid) {
    const LinearModel m = train_ovr(train_rows.x, train_rows.labels, manifest.classes, c, svm, &train_rows.difficult);
    const EvalResult r = evaluate_scores(image_scores(m, val_rows), manifest.classes, pick(data.labels, val),
                                         config.top_k, config.ap_mode, nullptr);
    const double metric = config.metric == SelectionMetric::kMap ? r.map : r.accuracy;
    if (metric > best_metric) {
      best_metric = metric;
      best_c = c;
    }
  }
  spdlog::info("{}: selected C = {} ({} validation images{})", config.name, best_c, val.size(),
               held_out ? ", held out from train" : "");

  std::vector<int> final_train = train;
  final_train.insert(final_train.end(), val.begin(), val.end());
  std::sort(final_train.begin(), final_train.end());
  const Rows all_rows = make_rows(data, final_train, config.augment.fusion_train);
  const LinearModel model = train_ovr(all_rows.x, all_rows.labels, manifest.classes, best_c, svm, &all_rows.difficult);
  const Rows test_rows = make_rows(data, test, config.augment.fusion_test);

  ExperimentResult out;
  out.test_scores = image_scores(model, test_rows);
  const auto test_difficult = pick(data.difficult, test);
  out.row.eval = evaluate_scores(out.test_scores, manifest.classes, pick(data.labels, test), config.top_k,
                                 config.ap_mode, &test_difficult);

  const long long dim = representation_dim(config, uses_cnn(config) ? &spec : nullptr);
  if (dim != static_cast<long long>(test_rows.x.cols)) {
    throw NumericalError("representation dimension " + std::to_string(test_rows.x.cols) + " differs from expected " +
                         std::to_string(dim));
  }
  out.row.experiment = config.name;
  out.row.method = method_tag(config, spec.name);
  out.row.spool = uses_ifv(config) && config.ifv.spatial == SpatialScheme::kPyramid   ? "spm"
                  : uses_ifv(config) && config.ifv.spatial == SpatialScheme::kExtended ? "(x,y)"
                                                                                        : "-";
  out.row.aug = config.augment.kind == AugmentKind::kNone
                    ? "-"
                    : std::string(config.augment.kind == AugmentKind::kFlip ? "F" : "C+F") + " " +
                          fusion_code(config.augment.fusion_train) + "/" + fusion_code(config.augment.fusion_test);
  out.row.dim = dim;
  out.row.c = best_c;
  out.row.settings = describe(config);
  return out;
}

std::string round_thousands(long long dim) {
  if (dim < 1000) return std::to_string(dim);
  return std::to_string(static_cast<long long>(std::llround(static_cast<double>(dim) / 1000.0))) + "K";
}

std::vector<DimsEntry> table_dims() {
  std::vector<DimsEntry> out;
  const auto add = [&](const std::string& label, const ExperimentConfig& c, const std::string& printed) {
    out.push_back({label, representation_dim(c), printed});
  };
  ExperimentConfig fk;
  fk.ifv.components = 256;
  fk.ifv.pca_dim = 80;
  fk.ifv.spatial = SpatialScheme::kPyramid;
  fk.ifv.normalisation = FisherNormalisation::kClassicDoubleSqrt;
  add("FK spm K=256", fk, "327K");
  fk.ifv.normalisation = FisherNormalisation::kIntraNormSingleSqrt;
  add("FK IN spm K=256", fk, "327K");

  ExperimentConfig xy;
  xy.ifv.components = 256;
  xy.ifv.spatial = SpatialScheme::kExtended;
  add("FK IN (x,y) K=256", xy, "42K");
  xy.ifv.components = 512;
  add("FK IN 512 (x,y)", xy, "84K");

  ExperimentConfig col;
  col.ifv.components = 512;
  col.ifv.descriptor = "lcs";
  add("FK IN COL 512", col, "82K");

  ExperimentConfig colplus = xy;
  colplus.ifv.descriptor = "sift+lcs";
  add("FK IN 512 COL+ (x,y)", colplus, "166K");

  for (const std::string arch : {"CNN-F", "CNN-M", "CNN-S", "CNN-M-2048", "CNN-M-1024", "CNN-M-128"}) {
    ExperimentConfig c;
    c.kind = RepresentationKind::kCnn;
    c.cnn.architecture = arch;
    const long long d = representation_dim(c);
    add(arch, c, d >= 1000 ? std::to_string(d / 1024) + "K" : std::to_string(d));
  }
  ExperimentConfig stack_t;
  stack_t.kind = RepresentationKind::kCnn;
  stack_t.cnn.architecture = "CNN-M";
  stack_t.augment = {AugmentKind::kCropFlip, Fusion::kStack, Fusion::kStack};
  add("CNN-M C+F t/t", stack_t, "41K");

  ExperimentConfig fkf = xy;
  fkf.kind = RepresentationKind::kStack;
  fkf.cnn.architecture = "CNN-F";
  fkf.augment = {AugmentKind::kCropFlip, Fusion::kSamples, Fusion::kSum};
  add("FK+CNN-F (x,y) C+F f/s", fkf, "88K");
  fkf.cnn.architecture = "CNN-M-2048";
  add("FK+CNN-M-2048 (x,y) C+F f/s", fkf, "86K");
  return out;
}

}  // namespace dvk::harness
