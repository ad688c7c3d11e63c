#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dvk/augment.hpp"
#include "dvk/cnn/architecture.hpp"
#include "dvk/descriptors.hpp"
#include "dvk/eval.hpp"
#include "dvk/fisher.hpp"
#include "dvk/gmm.hpp"
#include "dvk/reduce.hpp"
#include "dvk/svm.hpp"

namespace dvk::harness {

enum class RepresentationKind { kIfv, kCnn, kStack };

struct IfvSettings {
  std::string descriptor = "sift";  // sift, lcs, or sift+lcs (colour stacked)
  int components = 256;
  int pca_dim = 80;
  FisherNormalisation normalisation = FisherNormalisation::kIntraNormSingleSqrt;
  SpatialScheme spatial = SpatialScheme::kNone;
  std::size_t max_descriptors = 200000;  // PCA / GMM training sample
  int gmm_iterations = 100;
  DenseSamplingParams sampling;
};

struct CnnSettings {
  std::filesystem::path model;       // model file with cnn.* sections
  std::string architecture = "CNN-F";  // used when no model is given (dims only)
  bool l2_normalise = true;
};

// Parsed from an INI file:
//   [experiment] name, manifest, seed, cache_dir
//   [representation] kind = ifv | cnn | stack
//   [ifv] descriptor, components, pca_dim, normalisation = classic | intra,
//         spatial = none | spm | xy, max_descriptors, gmm_iterations, stride, scales
//   [cnn] model, architecture, l2_normalise
//   [augment] kind = none | F | C+F, fusion_train, fusion_test, target
//   [svm] c_grid, metric = map | accuracy, tol, max_epochs, val_fraction
//   [eval] top_k, ap = integral | 11pt
struct ExperimentConfig {
  std::string name = "experiment";
  std::filesystem::path manifest;
  std::uint64_t seed = 0;
  std::filesystem::path cache_dir;  // empty disables the feature cache
  RepresentationKind kind = RepresentationKind::kIfv;
  IfvSettings ifv;
  CnnSettings cnn;
  AugmentStrategy augment;
  int target = 224;
  std::vector<double> c_grid{kDefaultCGrid.begin(), kDefaultCGrid.end()};
  SelectionMetric metric = SelectionMetric::kMap;
  SvmOptions svm;
  double val_fraction = 0.2;
  int top_k = 5;
  ApMode ap_mode = ApMode::kIntegral;
};

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every setting that can affect the results, as sorted key=value pairs joined by ';'.
std::string describe(const ExperimentConfig& config);

FisherConfig fisher_config(const IfvSettings& ifv);

// One descriptor type with its projection and vocabulary.
struct IfvChannel {
  std::string descriptor;  // "sift" or "lcs"
  FisherConfig fisher;
  PcaModel pca;
  GmmModel gmm;
};

/// Dense SIFT on the grey image, or local colour statistics on Lab.
DescriptorSet extract_descriptors(const std::string& descriptor, const RasterImage& image,
                                  const DenseSamplingParams& sampling);

// Per image, at most ceil(max_descriptors / images) descriptors chosen by a
// seeded shuffle, kept in extraction order.
std::vector<DescriptorSet> sample_descriptors(const std::string& descriptor,
                                              const std::vector<const RasterImage*>& images, const IfvSettings& ifv,
                                              std::uint64_t seed);

/// Fits PCA and then the GMM (on projected, optionally extended, descriptors).
IfvChannel fit_channel(const std::string& descriptor, const FisherConfig& fisher,
                       const std::vector<DescriptorSet>& sampled, const std::vector<const RasterImage*>& images,
                       const IfvSettings& ifv, std::uint64_t seed);

/// Concatenated per-channel encodings, re-normalised when there is more than one.
FeatureVector encode_ifv(const std::vector<IfvChannel>& channels, const RasterImage& image,
                         const DenseSamplingParams& sampling);

// Final representation dimension, after fusion. `cnn_spec` overrides the
// architecture named in the config.
long long representation_dim(const ExperimentConfig& config, const cnn::ArchitectureSpec* cnn_spec = nullptr);

struct ResultRow {
  std::string experiment;
  std::string method;  // e.g. "FK IN K=256", "CNN-M", "FK IN K=512+CNN-F"
  std::string spool;   // "-", "spm" or "(x,y)"
  std::string aug;     // "-", "F" or "C+F", with train/test fusion, e.g. "C+F f/s"
  long long dim = 0;
  double c = 0;
  EvalResult eval;
  std::string settings;

  static std::string header();
  /// Tab separated, numbers printed with %.17g.
  std::string format() const;
};

struct ExperimentResult {
  ResultRow row;
  std::vector<double> test_scores;  // test images x classes
};

ExperimentResult run_experiment(const ExperimentConfig& config);

// Dimension calculator over the configurations of the published comparison
// table. `printed` is the table's rounded form, e.g. "84K".
struct DimsEntry {
  std::string label;
  long long dim = 0;
  std::string printed;
};

std::vector<DimsEntry> table_dims();
std::string round_thousands(long long dim);

}  // namespace dvk::harness
