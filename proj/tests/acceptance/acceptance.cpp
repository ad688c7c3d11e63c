// Acceptance suite: one PASS/FAIL line per criterion.
//   dvk_acceptance            run all criteria
//   dvk_acceptance 3 9 12     run a subset
#include <omp.h>
#include <spdlog/spdlog.h>
#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dvk/augment.hpp"
#include "dvk/cnn/train.hpp"
#include "dvk/eval.hpp"
#include "dvk/fisher.hpp"
#include "dvk/gmm.hpp"
#include "dvk/harness/experiment.hpp"
#include "dvk/harness/storage.hpp"
#include "dvk/harness/synth.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace dvk;
using namespace dvk::harness;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format_text(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = DVK_ACCEPTANCE_WORK;
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// ---- shared data -----------------------------------------------------------

constexpr std::uint64_t kTextureSeed = 11;
constexpr std::uint64_t kShapesSeed = 7;
constexpr int kShapesTrain = 2000;
constexpr int kCompareTrain = 500;
constexpr int kCompareTest = 500;

fs::path texture_dataset() {
  const fs::path dir = work_dir() / "two_texture";
  if (!fs::exists(dir / "manifest.tsv")) write_dataset(make_two_texture(200, 200, kTextureSeed), dir);
  return dir;
}

// The first kCompareTrain training images of the shapes set, and a test split.
fs::path shapes_compare_dataset() {
  const fs::path dir = work_dir() / "shapes_compare";
  if (fs::exists(dir / "manifest.tsv")) return dir;
  SynthDataset full = make_shapes(kShapesTrain, kCompareTest, kShapesSeed);
  SynthDataset sub;
  sub.classes = full.classes;
  for (std::size_t i = 0; i < full.images.size(); ++i) {
    if (full.splits[i] == "train" && static_cast<int>(i) >= kCompareTrain) continue;
    sub.images.push_back(full.images[i]);
    sub.labels.push_back(full.labels[i]);
    sub.splits.push_back(full.splits[i]);
  }
  write_dataset(sub, dir);
  return dir;
}

std::string ifv_config(const std::string& name, const fs::path& data, bool crop_flip, const std::string& spatial) {
  std::ostringstream s;
  s << "[experiment]\nname = " << name << "\nmanifest = " << (data / "manifest.tsv").string() << "\nseed = 5\n"
    << "[representation]\nkind = ifv\n"
    << "[ifv]\ndescriptor = sift\ncomponents = 16\npca_dim = 20\nmax_descriptors = 50000\nspatial = " << spatial
    << "\n[augment]\n"
    << (crop_flip ? "kind = C+F\nfusion_train = f\nfusion_test = s\n" : "kind = none\n") << "target = 64\n"
    << "[svm]\nmetric = accuracy\n";
  return s.str();
}

std::string cnn_config(const std::string& name, const fs::path& data, const fs::path& model, bool l2) {
  std::ostringstream s;
  s << "[experiment]\nname = " << name << "\nmanifest = " << (data / "manifest.tsv").string() << "\nseed = 5\n"
    << "[representation]\nkind = cnn\n"
    << "[cnn]\nmodel = " << model.string() << "\nl2_normalise = " << (l2 ? "true" : "false") << "\n"
    << "[augment]\nkind = none\ntarget = 64\n"
    << "[svm]\nmetric = accuracy\n";
  return s.str();
}

fs::path write_config(const std::string& file, const std::string& text) {
  const fs::path p = work_dir() / file;
  write_atomic(p, text);
  return p;
}

// ---- micro network ---------------------------------------------------------

fs::path micro_model_path() { return work_dir() / "micro_cnn_f.model"; }

cnn::LabelledImages shapes_train() {
  const SynthDataset d = make_shapes(kShapesTrain, 0, kShapesSeed);
  cnn::LabelledImages out;
  for (std::size_t i = 0; i < d.images.size(); ++i) {
    out.images.push_back(d.images[i]);
    out.labels.push_back({d.labels[i]});
  }
  return out;
}

struct MicroRun {
  cnn::ArchitectureSpec spec;
  cnn::Network state;
  cnn::TrainReport report;
};

MicroRun train_micro_net() {
  MicroRun run;
  run.spec = cnn::scaled_architecture(cnn::build_architecture("CNN-F"), 8, 64, 10);
  run.state = cnn::init_network<float>(run.spec, 1, 0.1);
  cnn::TrainOptions o;
  o.epochs = 30;
  o.batch_size = 16;
  o.learning_rate = 3e-3;
  o.patience = 1;
  o.input_scale = -1;
  o.seed = 3;
  o.on_epoch = [](const cnn::EpochStats& s) {
    std::fprintf(stderr, "  epoch %2d loss %.4f train accuracy %.4f lr %g\n", s.epoch, s.train_loss,
                 s.train_accuracy, s.learning_rate);
  };
  run.report = cnn::train_network(run.state, run.spec, shapes_train(), o);
  ModelContainer c;
  put_network(c, run.spec, run.state);
  c.save(micro_model_path());
  return run;
}

std::pair<cnn::ArchitectureSpec, cnn::Network> micro_net() {
  if (!fs::exists(micro_model_path())) train_micro_net();
  auto net = get_network(ModelContainer::load(micro_model_path()));
  net.second.mode = cnn::Mode::kEval;
  return net;
}

// ---- criteria --------------------------------------------------------------

Outcome criterion1() {
  // Raw dimensions and the table's printed form.
  const std::map<std::string, std::pair<long long, std::string>> expected = {
      {"FK spm K=256", {327680, "327K"}},
      {"FK IN spm K=256", {327680, "327K"}},
      {"FK IN (x,y) K=256", {41984, "42K"}},
      {"FK IN 512 (x,y)", {83968, "84K"}},
      {"FK IN COL 512", {81920, "82K"}},
      {"FK IN 512 COL+ (x,y)", {165888, "166K"}},
      {"CNN-F", {4096, "4K"}},
      {"CNN-M", {4096, "4K"}},
      {"CNN-S", {4096, "4K"}},
      {"CNN-M-2048", {2048, "2K"}},
      {"CNN-M-1024", {1024, "1K"}},
      {"CNN-M-128", {128, "128"}},
      {"CNN-M C+F t/t", {40960, "41K"}},
      {"FK+CNN-F (x,y) C+F f/s", {88064, "88K"}},
      {"FK+CNN-M-2048 (x,y) C+F f/s", {86016, "86K"}},
  };
  const auto thousands = [](const std::string& s) {
    return s.back() == 'K' ? std::stod(s.substr(0, s.size() - 1)) : std::stod(s) / 1000.0;
  };
  const auto entries = table_dims();
  int checked = 0;
  std::string bad;
  for (const auto& e : entries) {
    const auto it = expected.find(e.label);
    if (it == expected.end()) {
      bad += " unexpected:" + e.label;
      continue;
    }
    ++checked;
    if (e.dim != it->second.first) bad += " " + e.label + "=" + std::to_string(e.dim);
    if (e.printed != it->second.second) bad += " " + e.label + " printed " + e.printed;
    if (std::abs(thousands(round_thousands(e.dim)) - thousands(it->second.second)) > 1.0) {
      bad += " " + e.label + " rounds to " + round_thousands(e.dim);
    }
  }
  const long long xy = fv_dimension({FisherNormalisation::kIntraNormSingleSqrt, SpatialScheme::kExtended, 256, 82});
  if (xy != 41984) bad += " fv_dimension(K=256,(x,y))=" + std::to_string(xy);
  const bool pass = bad.empty() && checked == static_cast<int>(expected.size());
  return {pass, format_text("%d table entries reproduced exactly", checked) + bad};
}

Outcome criterion2() {
  const auto table = dvk::testing::load_arch_table(DVK_TEST_DATA "/cnn_architectures.tsv");
  int rows = 0;
  std::string bad;
  for (const char* name : {"CNN-F", "CNN-M", "CNN-S"}) {
    const cnn::ArchitectureSpec spec = cnn::build_architecture(name);
    std::vector<dvk::testing::ArchRow> want;
    for (const auto& r : table)
      if (r.arch == name) want.push_back(r);
    const auto got = dvk::testing::summarise(spec);
    if (got.size() != want.size()) bad += format_text(" %s: %zu rows vs %zu", name, got.size(), want.size());
    for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
      if (!(got[i] == want[i])) bad += std::string(" ") + name + ":" + want[i].layer;
      ++rows;
    }
    try {
      const auto shapes = cnn::shape_pipeline(spec);
      const int fc6 = spec.find_layer("full6");
      if (fc6 < 1 || spec.layers[fc6 - 1].kind != cnn::LayerKind::kMaxPool) bad += std::string(" ") + name + ":no pool5";
      if (shapes.back().size() != 1000) bad += std::string(" ") + name + ":output";
    } catch (const std::exception& e) {
      bad += std::string(" ") + name + ":" + e.what();
    }
  }
  return {bad.empty() && rows > 0, format_text("%d transcribed rows match, 224x224 pipelines compose", rows) + bad};
}

Outcome criterion3() {
  constexpr int kSeeds = 20;
  constexpr double kTol = 1e-4;
  double worst = 0;
  std::string worst_layer;
  for (const auto& [layer, shape] : dvk::testing::gradient_probe_layers()) {
    for (int seed = 0; seed < kSeeds; ++seed) {
      const double err = dvk::testing::layer_gradient_error(layer, shape, 2, 1000 + seed);
      if (!(err <= worst)) {
        worst = err;
        worst_layer = layer.name;
      }
    }
  }
  return {worst < kTol, format_text("8 layer kinds x %d seeds, worst relative error %.2e (%s), limit %.0e", kSeeds, worst,
                            worst_layer.c_str(), kTol)};
}

Outcome criterion4() {
  constexpr int kInstances = 200;
  constexpr double kTol = 1e-10;
  std::mt19937_64 rng(404);
  double worst = 0;
  int comparisons = 0;
  for (int t = 0; t < kInstances; ++t) {
    const int k = 1 + static_cast<int>(rng() % 6), d = 1 + static_cast<int>(rng() % 5);
    const int n = 1 + static_cast<int>(rng() % 80), w = 8 + static_cast<int>(rng() % 90),
              h = 8 + static_cast<int>(rng() % 90);
    const GmmModel plain = dvk::testing::random_gmm(k, d, rng);
    const GmmModel extended = dvk::testing::random_gmm(k, d + 2, rng);
    const DescriptorSet x = dvk::testing::random_descriptors(plain, n, w, h, rng);
    for (auto s : {SpatialScheme::kNone, SpatialScheme::kPyramid, SpatialScheme::kExtended}) {
      for (auto norm : {FisherNormalisation::kClassicDoubleSqrt, FisherNormalisation::kIntraNormSingleSqrt}) {
        const GmmModel& m = s == SpatialScheme::kExtended ? extended : plain;
        const FisherConfig cfg{norm, s, k, m.dim};
        const auto want = dvk::testing::fisher_oracle(m, x, cfg, w, h);
        const auto got = encode_spatial(m, x, cfg, w, h);
        if (got.dim() != want.size()) return {false, format_text("dimension mismatch on instance %d", t)};
        for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got.values[i] - want[i]));
        ++comparisons;
      }
    }
  }
  return {worst <= kTol, format_text("%d instances x 6 variants (%d encodings), max abs difference %.2e, limit %.0e",
                             kInstances, comparisons, worst, kTol)};
}

Outcome criterion5() {
  constexpr int kRuns = 50;
  constexpr double kMaxDecrease = 1e-8;
  constexpr double kMeanTol = 0.05;
  double worst_drop = 0;
  for (int run = 0; run < kRuns; ++run) {
    std::mt19937_64 rng(5000 + run);
    const GmmModel truth = dvk::testing::random_gmm(3 + run % 6, 2 + run % 5, rng);
    const DescriptorSet data = dvk::testing::random_descriptors(truth, 600, 1, 1, rng);
    GmmTrace trace;
    GmmOptions o;
    o.max_iters = 60;
    o.tol = 0;
    fit_gmm(data, truth.components, run, o, &trace);
    for (std::size_t i = 1; i < trace.log_likelihood.size(); ++i) {
      worst_drop = std::max(worst_drop, trace.log_likelihood[i - 1] - trace.log_likelihood[i]);
    }
  }
  // Two unit-variance clusters ten apart.
  std::mt19937_64 rng(55);
  std::normal_distribution<double> z;
  DescriptorSet two(2);
  for (int i = 0; i < 40000; ++i) two.push_back(std::vector<double>{(i % 2 ? 10.0 : 0.0) + z(rng), z(rng)}, {});
  const GmmModel m = fit_gmm(two, 2, 3);
  const int lo = m.means[0] < m.means[2] ? 0 : 1;
  const double err = std::max({std::abs(m.means[lo * 2]), std::abs(m.means[lo * 2 + 1]),
                               std::abs(m.means[(1 - lo) * 2] - 10.0), std::abs(m.means[(1 - lo) * 2 + 1])});
  return {worst_drop <= kMaxDecrease && err <= kMeanTol,
          format_text("%d runs, largest log-likelihood decrease %.2e (limit %.0e); cluster means within %.4f (limit %.2f)",
              kRuns, worst_drop, kMaxDecrease, err, kMeanTol)};
}

Outcome criterion6() {
  constexpr int kSizes = 100;
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> side(16, 400);
  std::uniform_real_distribution<double> u;
  int wrong = 0, mirror_bad = 0;
  for (int t = 0; t < kSizes; ++t) {
    RasterImage img(side(rng), side(rng), 3);
    for (double& v : img.data) v = u(rng);
    const std::array<std::pair<AugmentKind, std::size_t>, 3> cases{
        {{AugmentKind::kNone, 1}, {AugmentKind::kFlip, 2}, {AugmentKind::kCropFlip, 10}}};
    for (const auto& [kind, count] : cases) {
      for (bool for_cnn : {false, true}) wrong += generate_samples(img, kind, 64, for_cnn).size() != count;
    }
    mirror_bad += !(mirror(mirror(img)) == img);
  }
  return {wrong == 0 && mirror_bad == 0,
          format_text("%d image sizes: %d wrong sample counts, %d mirror involution failures", kSizes, wrong, mirror_bad)};
}

Outcome criterion7() {
  constexpr int kInstances = 1000;
  constexpr double kTol = 1e-12;
  std::mt19937_64 rng(707);
  double ap_err = 0, topk_err = 0, mca_err = 0;
  for (int t = 0; t < kInstances; ++t) {
    const int n = 1 + static_cast<int>(rng() % 60);
    std::vector<double> s(n);
    std::vector<bool> pos(n);
    std::unique_ptr<bool[]> flags(new bool[n]);
    for (int i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 12) / 4.0;
      flags[i] = pos[i] = rng() % 3 == 0;
    }
    flags[rng() % n] = true;
    for (int i = 0; i < n; ++i) pos[i] = flags[i];
    ap_err = std::max(ap_err, std::abs(average_precision(s, std::span<const bool>(flags.get(), n)) -
                                       dvk::testing::ap_oracle(s, pos)));

    const int classes = 2 + static_cast<int>(rng() % 8), k = 1 + static_cast<int>(rng() % classes);
    std::vector<double> scores(static_cast<std::size_t>(n) * classes);
    for (double& v : scores) v = static_cast<double>(rng() % 5);
    std::vector<int> truth(n), pred(n);
    for (int i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng() % classes);
      pred[i] = static_cast<int>(rng() % classes);
    }
    topk_err = std::max(topk_err, std::abs(top_k_error(scores, classes, truth, k) -
                                           dvk::testing::top_k_oracle(scores, classes, truth, k)));
    mca_err = std::max(mca_err, std::abs(mean_class_accuracy(pred, truth, classes) -
                                         dvk::testing::mca_oracle(pred, truth, classes)));
  }
  // Exact edge cases.
  bool edges = true;
  for (int n = 1; n <= 20; ++n) {
    std::vector<double> s(n);
    for (int i = 0; i < n; ++i) s[i] = n - i;
    std::unique_ptr<bool[]> top(new bool[n]());
    for (int p = 0; p < (n + 1) / 2; ++p) top[p] = true;
    edges &= average_precision(s, std::span<const bool>(top.get(), n)) == 1.0;
    for (int r = 1; r <= n; ++r) {
      std::unique_ptr<bool[]> one(new bool[n]());
      one[r - 1] = true;
      edges &= average_precision(s, std::span<const bool>(one.get(), n)) == 1.0 / r;
    }
  }
  const bool pass = ap_err <= kTol && topk_err <= kTol && mca_err <= kTol && edges;
  return {pass, format_text("%d instances each: AP %.1e, top-k %.1e, mean class accuracy %.1e (limit %.0e); edge cases %s",
                    kInstances, ap_err, topk_err, mca_err, kTol, edges ? "exact" : "WRONG")};
}

ExperimentResult run_config(const fs::path& path) { return run_experiment(load_config(path)); }

Outcome criterion8() {
  constexpr double kMinAccuracy = 0.95;
  constexpr double kMaxDrop = 0.01;
  const fs::path data = texture_dataset();
  const auto plain = run_config(write_config("c8_ifv.ini", ifv_config("c8-ifv", data, false, "none")));
  const auto aug = run_config(write_config("c8_ifv_cf.ini", ifv_config("c8-ifv-cf", data, true, "none")));
  const double a = plain.row.eval.accuracy, b = aug.row.eval.accuracy;
  return {a >= kMinAccuracy && b >= a - kMaxDrop,
          format_text("IFV K=16 D=20 accuracy %.4f (min %.2f); with C+F f/s %.4f (max drop %.2f)", a, kMinAccuracy, b,
              kMaxDrop)};
}

Outcome criterion9() {
  constexpr double kMinTrainAccuracy = 0.99;
  constexpr int kMaxEpochs = 30;
  const MicroRun run = train_micro_net();
  double best = 0;
  int reached = 0;
  for (const auto& e : run.report.epochs) {
    best = std::max(best, e.train_accuracy);
    if (!reached && e.train_accuracy >= kMinTrainAccuracy) reached = e.epoch;
  }
  const double final_acc = run.report.epochs.empty() ? 0 : run.report.epochs.back().train_accuracy;
  const fs::path data = shapes_compare_dataset();
  const auto cnn = run_config(write_config("c9_cnn.ini", cnn_config("c9-cnn", data, micro_model_path(), true)));
  const auto ifv = run_config(write_config("c9_ifv.ini", ifv_config("c9-ifv", data, false, "xy")));
  const bool trained = reached > 0 && reached <= kMaxEpochs;
  const bool ordered = cnn.row.eval.accuracy > ifv.row.eval.accuracy;
  return {trained && ordered,
          format_text("train accuracy >= %.2f at epoch %d (best %.4f, final %.4f); test accuracy full7+SVM %.4f vs IFV %.4f "
              "(mAP %.4f vs %.4f)",
              kMinTrainAccuracy, reached, best, final_acc, cnn.row.eval.accuracy, ifv.row.eval.accuracy,
              cnn.row.eval.map, ifv.row.eval.map)};
}

Outcome criterion10() {
  const auto [spec, state] = micro_net();
  const SynthDataset d = make_shapes(kShapesTrain, 0, kShapesSeed);
  cnn::LabelledImages subset;
  for (std::size_t i = 0; i < d.images.size() && subset.images.size() < 300; ++i) {
    if (d.labels[i] < 3) {
      subset.images.push_back(d.images[i]);
      subset.labels.push_back({d.labels[i]});
    }
  }
  cnn::FineTuneOptions o;
  o.loss = cnn::LossKind::kHingeRank;
  o.stages = {cnn::default_fine_tune_schedule(3).front()};
  o.batch_size = 16;
  o.seed = 10;
  const auto result = cnn::fine_tune(state, spec, subset, 3, o);
  const auto& obj = result.stage_objective.front();
  bool strict = obj.size() >= 2;
  std::string trace;
  for (std::size_t i = 0; i < obj.size(); ++i) {
    if (i > 0) strict &= obj[i] < obj[i - 1];
    trace += format_text("%s%.4f", i ? " > " : "", obj[i]);
  }
  return {strict, format_text("3-class ranking loss over the first stage (last %.0e, hidden %.0e): ", o.stages[0].last_rate,
                      o.stages[0].hidden_rate) + trace};
}

Outcome criterion11() {
  micro_net();
  const fs::path data = shapes_compare_dataset();
  const auto l2 = run_config(write_config("c11_l2.ini", cnn_config("c11-l2", data, micro_model_path(), true)));
  const auto raw = run_config(write_config("c11_raw.ini", cnn_config("c11-raw", data, micro_model_path(), false)));
  return {l2.row.eval.map >= raw.row.eval.map,
          format_text("test mAP l2-normalised %.4f vs unnormalised %.4f (accuracy %.4f vs %.4f)", l2.row.eval.map,
              raw.row.eval.map, l2.row.eval.accuracy, raw.row.eval.accuracy)};
}

std::string run_cli(int threads, const fs::path& config, int* status) {
  const fs::path out = work_dir() / format_text("c12_%d_%s.out", threads, config.stem().c_str());
  const std::string cmd = std::string(DVK_CLI_PATH) + " --threads " + std::to_string(threads) + " run --config " +
                          config.string() + " > " + out.string() + " 2>/dev/null";
  const int raw = std::system(cmd.c_str());
  *status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  const std::string text = fs::exists(out) ? read_file(out) : "";
  const auto nl = text.find('\n');
  return nl == std::string::npos ? "" : text.substr(nl + 1);
}

Outcome criterion12() {
  unsetenv("DVK_CACHE_DIR");
  const fs::path data = texture_dataset();
  std::string detail;
  bool pass = true;
  for (bool cf : {false, true}) {
    const fs::path cfg = write_config(cf ? "c8_ifv_cf.ini" : "c8_ifv.ini",
                                      ifv_config(cf ? "c8-ifv-cf" : "c8-ifv", data, cf, "none"));
    int s1 = 0, s8 = 0;
    const std::string one = run_cli(1, cfg, &s1), eight = run_cli(8, cfg, &s8);
    const bool same = s1 == 0 && s8 == 0 && !one.empty() && one == eight;
    pass &= same;
    detail += format_text("%s%s: %s", detail.empty() ? "" : "; ", cf ? "C+F f/s" : "no aug",
                  same ? "rows bit-identical at 1 and 8 threads" : "rows DIFFER or run failed");
  }
  return {pass, detail};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: no runtime limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::err);
  const std::vector<Criterion> all = {
      {1, "dimension reproduction", 1, criterion1},
      {2, "architecture reproduction", 1, criterion2},
      {3, "gradient correctness", 120, criterion3},
      {4, "Fisher vector oracle equivalence", 60, criterion4},
      {5, "GMM monotone EM and cluster recovery", 60, criterion5},
      {6, "augmentation counts", 0, criterion6},
      {7, "AP and metric oracles", 0, criterion7},
      {8, "end-to-end shallow pipeline", 300, criterion8},
      {9, "end-to-end deep pipeline", 900, criterion9},
      {10, "fine-tuning decreases the ranking loss", 300, criterion10},
      {11, "l2 normalisation ablation", 0, criterion11},
      {12, "thread-count determinism", 0, criterion12},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += format_text("; runtime %.1f s exceeds %.0f s", secs, c.budget_s);
    }
    failures += !o.pass;
    std::printf("%s criterion %2d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
