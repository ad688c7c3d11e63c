// dvk: command line front end for the encoders, CNN training and the
// experiment runner. Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.

#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dvk/augment.hpp"
#include "dvk/cnn/train.hpp"
#include "dvk/error.hpp"
#include "dvk/eval.hpp"
#include "dvk/harness/experiment.hpp"
#include "dvk/harness/manifest.hpp"
#include "dvk/harness/plot.hpp"
#include "dvk/harness/storage.hpp"
#include "dvk/harness/synth.hpp"
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace fs = std::filesystem;
using namespace dvk;
using namespace dvk::harness;

namespace {

// Encoded features for a manifest: one row per image, or per augmented
// sample when fusion is "f" (rows then share the image index).
struct FeatureTable {
  std::vector<FeatureVector> rows;
  std::vector<int> image;
};

void save_table(const FeatureTable& t, const fs::path& path) {
  ModelContainer c;
  c.put("features", encode_features(t.rows));
  std::string idx;
  for (int i : t.image) idx += std::to_string(i) + "\n";
  c.put("features.image", idx);
  c.save(path);
}

FeatureTable load_table(const fs::path& path) {
  const ModelContainer c = ModelContainer::load(path);
  FeatureTable t;
  t.rows = decode_features(c.get("features"));
  std::istringstream in(c.get("features.image"));
  for (int i; in >> i;) t.image.push_back(i);
  if (t.image.size() != t.rows.size()) throw DataError(path.string() + ": row index does not match features");
  return t;
}

std::vector<RasterImage> load_images(const DatasetManifest& m) {
  const int n = static_cast<int>(m.entries.size());
  std::vector<RasterImage> images(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      images[i] = read_pnm(m.resolve(m.entries[i]));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw DataError(e);
  }
  return images;
}

cnn::LabelledImages labelled(const DatasetManifest& m, const std::vector<RasterImage>& images,
                             const std::string& split) {
  cnn::LabelledImages out;
  for (int i : m.split_indices(split)) {
    out.images.push_back(images[i]);
    out.labels.push_back(m.entries[i].labels);
  }
  return out;
}

FeatureTable fuse_rows(std::vector<std::vector<FeatureVector>> per_image, Fusion fusion) {
  FeatureTable t;
  for (std::size_t i = 0; i < per_image.size(); ++i) {
    for (auto& f : fuse(per_image[i], fusion)) {
      t.rows.push_back(round_to_storage(f));
      t.image.push_back(static_cast<int>(i));
    }
  }
  return t;
}

struct Split {
  FeatureMatrix x;
  std::vector<std::vector<int>> labels, difficult;
  std::vector<int> group;  // position of the row's image within the split
  int images = 0;
};

Split split_rows(const FeatureTable& t, const DatasetManifest& m, const std::vector<std::string>& splits) {
  std::vector<int> position(m.entries.size(), -1);
  Split s;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    for (const auto& name : splits) {
      if (m.entries[i].split == name) position[i] = s.images++;
    }
  }
  std::vector<FeatureVector> rows;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int i = t.image[r];
    if (i < 0 || i >= static_cast<int>(m.entries.size())) throw DataError("feature row refers to a missing image");
    if (position[i] < 0) continue;
    rows.push_back(t.rows[r]);
    s.labels.push_back(m.entries[i].labels);
    s.difficult.push_back(m.entries[i].difficult);
    s.group.push_back(position[i]);
  }
  if (rows.empty()) throw DataError("no feature rows in the requested split");
  s.x = FeatureMatrix::from_features(rows);
  return s;
}

std::vector<std::vector<int>> image_field(const DatasetManifest& m, const std::vector<std::string>& splits,
                                          bool difficult) {
  std::vector<std::vector<int>> out;
  for (const auto& e : m.entries) {
    for (const auto& name : splits) {
      if (e.split == name) out.push_back(difficult ? e.difficult : e.labels);
    }
  }
  return out;
}

SpatialScheme parse_spatial(const std::string& s) {
  if (s == "none") return SpatialScheme::kNone;
  if (s == "spm") return SpatialScheme::kPyramid;
  if (s == "xy") return SpatialScheme::kExtended;
  throw UsageError("spatial must be none, spm or xy");
}

FisherNormalisation parse_normalisation(const std::string& s) {
  if (s == "intra") return FisherNormalisation::kIntraNormSingleSqrt;
  if (s == "classic") return FisherNormalisation::kClassicDoubleSqrt;
  throw UsageError("normalisation must be classic or intra");
}

ApMode parse_ap(const std::string& s) {
  if (s == "integral") return ApMode::kIntegral;
  if (s == "11pt") return ApMode::kElevenPoint;
  throw UsageError("ap must be integral or 11pt");
}

template <typename Fn>
auto as_usage(Fn&& fn) {
  try {
    return fn();
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

void print_eval(const EvalResult& r) {
  std::printf("map\t%.17g\naccuracy\t%.17g\ntop_%d_error\t%.17g\nmean_class_accuracy\t%.17g\nnum_samples\t%d\n", r.map,
              r.accuracy, r.top_k, r.top_k_error, r.mean_class_accuracy, r.num_samples);
  for (const auto& [name, ap] : r.per_class_ap) std::printf("ap.%s\t%.17g\n", name.c_str(), ap);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dvk: shallow and deep image representations"};
  app.require_subcommand(1);
  int threads = 0;
  std::string log_level = "info";
  app.add_option("--threads", threads, "Worker threads (results do not depend on this)")->check(CLI::PositiveNumber);
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic dataset with a manifest");
  std::string synth_kind = "two-texture";
  int synth_train = 200, synth_test = 200, synth_size = 64;
  std::uint64_t synth_seed = 0;
  fs::path synth_out;
  synth->add_option("--kind", synth_kind, "two-texture or shapes")->check(CLI::IsMember({"two-texture", "shapes"}));
  synth->add_option("--train", synth_train)->check(CLI::PositiveNumber);
  synth->add_option("--test", synth_test)->check(CLI::PositiveNumber);
  synth->add_option("--size", synth_size)->check(CLI::Range(16, 4096));
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out)->required();

  // IFV steps
  IfvSettings ifv;
  auto* extract = app.add_subcommand("extract", "Sample dense descriptors from the training split");
  fs::path manifest_path, out_path, model_path, features_path, pool_path;
  std::string descriptor = "sift", split = "train";
  std::uint64_t seed = 0;
  extract->add_option("--manifest", manifest_path)->required();
  extract->add_option("--split", split);
  extract->add_option("--descriptor", descriptor)->check(CLI::IsMember({"sift", "lcs"}));
  extract->add_option("--max-descriptors", ifv.max_descriptors);
  extract->add_option("--stride", ifv.sampling.stride);
  extract->add_option("--scales", ifv.sampling.num_scales);
  extract->add_option("--seed", seed);
  extract->add_option("--out", out_path)->required();

  int pca_dim = 80;
  auto* fit_pca_cmd = app.add_subcommand("fit-pca", "Fit PCA on a descriptor sample");
  fit_pca_cmd->add_option("--descriptors", pool_path)->required();
  fit_pca_cmd->add_option("--dim", pca_dim)->check(CLI::PositiveNumber);
  fit_pca_cmd->add_option("--seed", seed);
  fit_pca_cmd->add_option("--out", out_path)->required();

  int components = 256;
  std::string spatial = "none";
  auto* fit_gmm_cmd = app.add_subcommand("fit-gmm", "Fit the GMM vocabulary on projected descriptors");
  fit_gmm_cmd->add_option("--descriptors", pool_path)->required();
  fit_gmm_cmd->add_option("--pca", model_path)->required();
  fit_gmm_cmd->add_option("--components", components)->check(CLI::PositiveNumber);
  fit_gmm_cmd->add_option("--spatial", spatial, "none or xy (appends positions)")->check(CLI::IsMember({"none", "xy"}));
  fit_gmm_cmd->add_option("--iterations", ifv.gmm_iterations);
  fit_gmm_cmd->add_option("--seed", seed);
  fit_gmm_cmd->add_option("--out", out_path)->required();

  std::string normalisation = "intra", aug = "none", fusion = "s";
  int target = 224;
  auto* encode = app.add_subcommand("encode", "Fisher-encode every manifest image");
  encode->add_option("--manifest", manifest_path)->required();
  encode->add_option("--model", model_path, "File with pca and gmm sections")->required();
  encode->add_option("--normalisation", normalisation)->check(CLI::IsMember({"classic", "intra"}));
  encode->add_option("--spatial", spatial)->check(CLI::IsMember({"none", "spm", "xy"}));
  encode->add_option("--aug", aug, "none, F or C+F");
  encode->add_option("--fusion", fusion, "f, s, m or t");
  encode->add_option("--target", target)->check(CLI::PositiveNumber);
  encode->add_option("--stride", ifv.sampling.stride);
  encode->add_option("--scales", ifv.sampling.num_scales);
  encode->add_option("--out", out_path)->required();

  // CNN steps
  std::string arch = "CNN-F";
  int width_divisor = 1, input_size = 224, classes = 1000;
  double init_std = 0.1;
  auto* cnn_init = app.add_subcommand("cnn-init", "Create a randomly initialised network");
  cnn_init->add_option("--arch", arch);
  cnn_init->add_option("--width-divisor", width_divisor)->check(CLI::PositiveNumber);
  cnn_init->add_option("--input", input_size)->check(CLI::PositiveNumber);
  cnn_init->add_option("--classes", classes)->check(CLI::PositiveNumber);
  cnn_init->add_option("--std", init_std);
  cnn_init->add_option("--seed", seed);
  cnn_init->add_option("--out", out_path)->required();

  cnn::TrainOptions train_opts;
  std::string loss = "softmax_ce";
  bool no_augment = false;
  auto* cnn_train = app.add_subcommand("cnn-train", "Train a network on the train split (val drives the schedule)");
  cnn_train->add_option("--model", model_path)->required();
  cnn_train->add_option("--manifest", manifest_path)->required();
  cnn_train->add_option("--epochs", train_opts.epochs)->check(CLI::PositiveNumber);
  cnn_train->add_option("--batch", train_opts.batch_size)->check(CLI::PositiveNumber);
  cnn_train->add_option("--lr", train_opts.learning_rate);
  cnn_train->add_option("--momentum", train_opts.momentum);
  cnn_train->add_option("--weight-decay", train_opts.weight_decay);
  cnn_train->add_option("--patience", train_opts.patience);
  cnn_train->add_option("--loss", loss);
  cnn_train->add_option("--input-scale", train_opts.input_scale, "Pixel multiplier; <= 0 uses 1 / pixel std");
  cnn_train->add_option("--colour-jitter", train_opts.colour_jitter);
  cnn_train->add_option("--stop-at", train_opts.stop_at_train_accuracy, "Stop once train accuracy reaches this");
  cnn_train->add_flag("--no-augment", no_augment);
  cnn_train->add_option("--seed", seed);
  cnn_train->add_option("--out", out_path)->required();

  int epochs_per_stage = 1, batch = 32;
  auto* cnn_finetune = app.add_subcommand("cnn-finetune", "Replace the score layer and fine-tune on a manifest");
  cnn_finetune->add_option("--model", model_path)->required();
  cnn_finetune->add_option("--manifest", manifest_path)->required();
  cnn_finetune->add_option("--loss", loss);
  cnn_finetune->add_option("--epochs-per-stage", epochs_per_stage)->check(CLI::PositiveNumber);
  cnn_finetune->add_option("--batch", batch)->check(CLI::PositiveNumber);
  cnn_finetune->add_flag("--no-augment", no_augment);
  cnn_finetune->add_option("--seed", seed);
  cnn_finetune->add_option("--out", out_path)->required();

  bool no_l2 = false;
  auto* cnn_extract = app.add_subcommand("cnn-extract", "Extract penultimate-layer features for every image");
  cnn_extract->add_option("--model", model_path)->required();
  cnn_extract->add_option("--manifest", manifest_path)->required();
  cnn_extract->add_option("--aug", aug, "none, F or C+F");
  cnn_extract->add_option("--fusion", fusion, "f, s, m or t");
  cnn_extract->add_flag("--no-l2", no_l2);
  cnn_extract->add_option("--out", out_path)->required();

  // SVM and evaluation
  std::vector<double> c_values;
  std::string metric = "map";
  SvmOptions svm_opts;
  auto* svm_train = app.add_subcommand("svm-train", "One-vs-rest SVMs; C from --c or chosen on the val split");
  svm_train->add_option("--features", features_path)->required();
  svm_train->add_option("--manifest", manifest_path)->required();
  svm_train->add_option("--c", c_values, "One value, or a grid searched on the val split")->delimiter(',');
  svm_train->add_option("--metric", metric)->check(CLI::IsMember({"map", "accuracy"}));
  svm_train->add_option("--tol", svm_opts.tol);
  svm_train->add_option("--max-epochs", svm_opts.max_epochs);
  svm_train->add_option("--seed", seed);
  svm_train->add_option("--out", out_path)->required();

  int top_k = 5;
  std::string ap = "integral";
  auto* evaluate = app.add_subcommand("evaluate", "Score a split and print its metrics");
  evaluate->add_option("--model", model_path)->required();
  evaluate->add_option("--features", features_path)->required();
  evaluate->add_option("--manifest", manifest_path)->required();
  std::string eval_split = "test";
  evaluate->add_option("--split", eval_split);
  evaluate->add_option("--top-k", top_k)->check(CLI::PositiveNumber);
  evaluate->add_option("--ap", ap)->check(CLI::IsMember({"integral", "11pt"}));

  fs::path config_path;
  auto* run = app.add_subcommand("run", "Run a full experiment from an INI config and print its results row");
  run->add_option("--config", config_path)->required();
  run->add_option("--out", out_path, "Results table to append to");

  app.add_subcommand("dims", "Dimensions of the published comparison configurations");

  fs::path input_path;
  std::string title, axis = "mAP";
  auto* plot = app.add_subcommand("plot", "Bar chart (SVG) from label<TAB>value lines");
  plot->add_option("--input", input_path)->required();
  plot->add_option("--title", title);
  plot->add_option("--axis", axis);
  plot->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    const auto level = spdlog::level::from_str(log_level);
    if (level == spdlog::level::off && log_level != "off") throw UsageError("unknown log level " + log_level);
    spdlog::set_default_logger(spdlog::stderr_color_mt("dvk"));
    spdlog::set_level(level);
    if (threads > 0) omp_set_num_threads(threads);

    if (*synth) {
      const SynthDataset d = synth_kind == "shapes" ? make_shapes(synth_train, synth_test, synth_seed, synth_size)
                                                    : make_two_texture(synth_train, synth_test, synth_seed, synth_size);
      write_dataset(d, synth_out);
      std::printf("%zu images written to %s\n", d.images.size(), synth_out.string().c_str());
    } else if (*extract) {
      const DatasetManifest m = load_manifest(manifest_path);
      const auto images = load_images(m);
      std::vector<const RasterImage*> chosen;
      for (int i : m.split_indices(split)) chosen.push_back(&images[i]);
      const auto sampled = sample_descriptors(descriptor, chosen, ifv, seed);
      std::vector<FeatureVector> rows, positions;
      for (std::size_t i = 0; i < sampled.size(); ++i) {
        const DescriptorSet xy = spatially_extend(sampled[i], chosen[i]->width, chosen[i]->height);
        for (std::size_t k = 0; k < sampled[i].size(); ++k) {
          const auto r = sampled[i].row(k);
          rows.push_back({{r.begin(), r.end()}, false, descriptor});
          positions.push_back({{xy.row(k)[xy.dim - 2], xy.row(k)[xy.dim - 1]}, false, "xy"});
        }
      }
      ModelContainer c;
      c.put("descriptors", encode_features(rows));
      c.put("descriptors.position", encode_features(positions));
      c.put("descriptors.kind", descriptor);
      c.save(out_path);
      std::printf("%zu descriptors from %zu images\n", rows.size(), chosen.size());
    } else if (*fit_pca_cmd || *fit_gmm_cmd) {
      const ModelContainer pool_file = ModelContainer::load(pool_path);
      const auto rows = decode_features(pool_file.get("descriptors"));
      if (rows.empty()) throw DataError("empty descriptor sample");
      DescriptorSet pool(static_cast<int>(rows.front().dim()));
      for (const auto& r : rows) pool.push_back(r.values, Site{});
      if (*fit_pca_cmd) {
        PcaOptions po;
        po.seed = seed;
        const PcaModel pca = fit_pca(pool, pca_dim, po);
        ModelContainer c;
        c.put("pca", serialise(pca));
        c.put("pca.descriptor", pool_file.get("descriptors.kind"));
        c.save(out_path);
        if (pca.rank_deficient) spdlog::warn("descriptor sample is rank deficient");
      } else {
        ModelContainer c = ModelContainer::load(model_path);
        const PcaModel pca = deserialise_pca(c.get("pca"));
        DescriptorSet data = apply_pca(pca, pool);
        if (spatial == "xy") {
          const auto pos = decode_features(pool_file.get("descriptors.position"));
          DescriptorSet ext(data.dim + 2);
          for (std::size_t k = 0; k < data.size(); ++k) {
            std::vector<double> v(data.row(k).begin(), data.row(k).end());
            v.insert(v.end(), pos[k].values.begin(), pos[k].values.end());
            ext.push_back(v, data.sites[k]);
          }
          data = std::move(ext);
        }
        GmmOptions go;
        go.max_iters = ifv.gmm_iterations;
        c.put("gmm", serialise(fit_gmm(data, components, seed, go)));
        c.save(out_path);
      }
    } else if (*encode) {
      const ModelContainer c = ModelContainer::load(model_path);
      IfvChannel ch;
      ch.descriptor = c.has("pca.descriptor") ? c.get("pca.descriptor") : "sift";
      ch.pca = deserialise_pca(c.get("pca"));
      ch.gmm = deserialise_gmm(c.get("gmm"));
      ch.fisher.normalisation = parse_normalisation(normalisation);
      ch.fisher.spatial = parse_spatial(spatial);
      ch.fisher.components = ch.gmm.components;
      ch.fisher.dim = ch.gmm.dim;
      const int expected = ch.pca.target_dim + (ch.fisher.spatial == SpatialScheme::kExtended ? 2 : 0);
      if (ch.gmm.dim != expected) throw UsageError("the GMM dimension does not match --spatial");
      const AugmentKind kind = as_usage([&] { return parse_augment_kind(aug); });
      const Fusion mode = as_usage([&] { return parse_fusion(fusion); });
      const DatasetManifest m = load_manifest(manifest_path);
      const auto images = load_images(m);
      const int n = static_cast<int>(images.size());
      std::vector<std::vector<FeatureVector>> per_image(n);
      std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
      for (int i = 0; i < n; ++i) {
        try {
          for (const auto& s : generate_samples(images[i], kind, target, false)) {
            per_image[i].push_back(encode_ifv({ch}, s, ifv.sampling));
          }
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
      for (const auto& e : errors) {
        if (!e.empty()) throw DataError(e);
      }
      save_table(fuse_rows(std::move(per_image), mode), out_path);
    } else if (*cnn_init) {
      const auto base = cnn::build_architecture(arch, classes);
      const auto spec = width_divisor == 1 && input_size == base.input.width
                            ? base
                            : cnn::scaled_architecture(base, width_divisor, input_size, classes);
      ModelContainer c;
      put_network(c, spec, cnn::init_network<float>(spec, seed, init_std));
      c.save(out_path);
    } else if (*cnn_train) {
      auto [spec, net] = get_network(ModelContainer::load(model_path));
      const DatasetManifest m = load_manifest(manifest_path);
      const auto images = load_images(m);
      const auto train = labelled(m, images, "train");
      const auto val = labelled(m, images, "val");
      train_opts.loss = as_usage([&] { return cnn::parse_loss_kind(loss); });
      train_opts.augment = !no_augment;
      train_opts.seed = seed;
      if (!val.images.empty()) train_opts.validation = &val;
      train_opts.on_epoch = [](const cnn::EpochStats& s) {
        spdlog::info("epoch {}: loss {:.4f}, train accuracy {:.4f}, validation error {:.4f}, lr {}", s.epoch,
                     s.train_loss, s.train_accuracy, s.validation_error, s.learning_rate);
      };
      const auto report = cnn::train_network(net, spec, train, train_opts);
      ModelContainer c;
      put_network(c, spec, net);
      c.save(out_path);
      std::printf("epochs\t%zu\ntrain_accuracy\t%.17g\n", report.epochs.size(),
                  report.epochs.empty() ? 0.0 : report.epochs.back().train_accuracy);
    } else if (*cnn_finetune) {
      const auto [spec, net] = get_network(ModelContainer::load(model_path));
      const DatasetManifest m = load_manifest(manifest_path);
      const auto images = load_images(m);
      cnn::FineTuneOptions fo;
      fo.loss = as_usage([&] { return cnn::parse_loss_kind(loss); });
      fo.stages = cnn::default_fine_tune_schedule(epochs_per_stage);
      fo.batch_size = batch;
      fo.augment = !no_augment;
      fo.seed = seed;
      const auto result =
          cnn::fine_tune(net, spec, labelled(m, images, "train"), static_cast<int>(m.classes.size()), fo);
      ModelContainer c;
      put_network(c, result.spec, result.state);
      c.save(out_path);
      for (std::size_t s = 0; s < result.stage_objective.size(); ++s) {
        std::printf("stage %zu", s + 1);
        for (double v : result.stage_objective[s]) std::printf("\t%.17g", v);
        std::printf("\n");
      }
    } else if (*cnn_extract) {
      const auto [spec, net] = get_network(ModelContainer::load(model_path));
      cnn::Network eval_net = net;
      eval_net.mode = cnn::Mode::kEval;
      const AugmentKind kind = as_usage([&] { return parse_augment_kind(aug); });
      const Fusion mode = as_usage([&] { return parse_fusion(fusion); });
      const DatasetManifest m = load_manifest(manifest_path);
      const auto images = load_images(m);
      std::vector<std::vector<FeatureVector>> per_image(images.size());
      for (std::size_t i = 0; i < images.size(); ++i) {
        per_image[i] = cnn::extract_features(eval_net, spec, generate_samples(images[i], kind, spec.input.width, true),
                                             !no_l2);
      }
      save_table(fuse_rows(std::move(per_image), mode), out_path);
    } else if (*svm_train) {
      const FeatureTable t = load_table(features_path);
      const DatasetManifest m = load_manifest(manifest_path);
      svm_opts.seed = seed;
      std::vector<double> grid = c_values.empty() ? kDefaultCGrid : c_values;
      const bool has_val = !m.split_indices("val").empty();
      double best_c = grid.front();
      if (grid.size() > 1) {
        if (!has_val) throw DataError("choosing C from a grid needs a val split");
        const Split tr = split_rows(t, m, {"train"});
        const Split va = split_rows(t, m, {"val"});
        std::sort(grid.begin(), grid.end());
        double best = -1;
        for (double c : grid) {
          const LinearModel model = train_ovr(tr.x, tr.labels, m.classes, c, svm_opts, &tr.difficult);
          const auto s = mean_group_scores(scores(model, va.x), static_cast<int>(m.classes.size()), va.group,
                                           va.images);
          const EvalResult r = evaluate_scores(s, m.classes, image_field(m, {"val"}, false));
          const double v = metric == "map" ? r.map : r.accuracy;
          spdlog::info("C = {}: validation {} {:.6f}", c, metric, v);
          if (v > best) {
            best = v;
            best_c = c;
          }
        }
      }
      const Split all = has_val ? split_rows(t, m, {"train", "val"}) : split_rows(t, m, {"train"});
      const LinearModel model = train_ovr(all.x, all.labels, m.classes, best_c, svm_opts, &all.difficult);
      ModelContainer c;
      c.put("svm", serialise(model));
      c.save(out_path);
      std::printf("c\t%.17g\n", best_c);
    } else if (*evaluate) {
      const LinearModel model = deserialise_linear(ModelContainer::load(model_path).get("svm"));
      const FeatureTable t = load_table(features_path);
      const DatasetManifest m = load_manifest(manifest_path);
      if (model.classes != m.classes) throw DataError("the model's classes differ from the manifest's");
      const Split s = split_rows(t, m, {eval_split});
      const auto ignored = image_field(m, {eval_split}, true);
      const auto sc = mean_group_scores(scores(model, s.x), static_cast<int>(m.classes.size()), s.group, s.images);
      print_eval(evaluate_scores(sc, m.classes, image_field(m, {eval_split}, false), top_k, parse_ap(ap), &ignored));
    } else if (*run) {
      ExperimentConfig config = load_config(config_path);
      if (config.cache_dir.empty()) config.cache_dir = default_cache_root({});
      const ExperimentResult result = run_experiment(config);
      const std::string line = result.row.format();
      std::printf("%s\n%s\n", ResultRow::header().c_str(), line.c_str());
      if (!out_path.empty()) {
        std::string table = fs::exists(out_path) ? read_file(out_path) : ResultRow::header() + "\n";
        write_atomic(out_path, table + line + "\n");
      }
    } else if (app.got_subcommand("dims")) {
      std::printf("configuration\tdim\tprinted\trounded\n");
      for (const auto& e : table_dims()) {
        std::printf("%s\t%lld\t%s\t%s\n", e.label.c_str(), e.dim, e.printed.c_str(), round_thousands(e.dim).c_str());
      }
    } else if (*plot) {
      std::string text;
      try {
        text = read_file(input_path);
      } catch (const DataError&) {
        throw UsageError("cannot read " + input_path.string());
      }
      emit_plot(parse_plot_points(text), out_path, title, axis);
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(ExitCode::kData);
  }
  return 0;
}
