#pragma once

// Independent reference implementations and generators shared by the unit
// tests and the acceptance runner. Everything here is written directly from
// the definitions, favouring long double and plain loops over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dvk/cnn/architecture.hpp"
#include "dvk/cnn/network.hpp"
#include "dvk/descriptors.hpp"
#include "dvk/fisher.hpp"
#include "dvk/gmm.hpp"

namespace dvk::testing {

using Ld = long double;

inline GmmModel random_gmm(int k, int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mean(-2.0, 2.0), var(0.2, 2.0), weight(0.2, 1.0);
  GmmModel m;
  m.components = k;
  m.dim = d;
  for (int i = 0; i < k * d; ++i) {
    m.means.push_back(mean(rng));
    m.variances.push_back(var(rng));
  }
  double total = 0;
  for (int i = 0; i < k; ++i) total += m.weights.emplace_back(weight(rng));
  for (double& w : m.weights) w /= total;
  return m;
}

// Points near the model's means, with sites uniform over a w x h image.
inline DescriptorSet random_descriptors(const GmmModel& m, int n, int w, int h, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, m.components - 1);
  std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h);
  DescriptorSet s(m.dim);
  std::vector<double> x(m.dim);
  for (int i = 0; i < n; ++i) {
    const int k = pick(rng);
    for (int j = 0; j < m.dim; ++j) x[j] = m.means[k * m.dim + j] + 1.5 * noise(rng);
    s.push_back(x, Site{ux(rng), uy(rng), 8});
  }
  return s;
}

inline std::vector<Ld> posterior_oracle(const GmmModel& m, const double* x) {
  std::vector<Ld> logp(m.components);
  for (int k = 0; k < m.components; ++k) {
    Ld acc = std::log(static_cast<Ld>(m.weights[k]));
    for (int j = 0; j < m.dim; ++j) {
      const Ld var = m.variances[k * m.dim + j];
      const Ld diff = x[j] - m.means[k * m.dim + j];
      acc -= 0.5L * std::log(2.0L * 3.14159265358979323846264338327950288L * var) + 0.5L * diff * diff / var;
    }
    logp[k] = acc;
  }
  const Ld top = *std::max_element(logp.begin(), logp.end());
  Ld total = 0;
  for (Ld& v : logp) total += (v = std::exp(v - top));
  for (Ld& v : logp) v /= total;
  return logp;
}

// [u_1, v_1, ..., u_K, v_K] by direct summation over descriptors.
inline std::vector<Ld> raw_fisher_oracle(const GmmModel& m, const std::vector<const double*>& xs) {
  const int d = m.dim;
  std::vector<Ld> fv(2 * static_cast<std::size_t>(m.components) * d, 0.0L);
  if (xs.empty()) return fv;
  const Ld n = static_cast<Ld>(xs.size());
  for (const double* x : xs) {
    const auto q = posterior_oracle(m, x);
    for (int k = 0; k < m.components; ++k) {
      if (q[k] < kPosteriorThreshold) continue;
      const Ld pi = m.weights[k];
      for (int j = 0; j < d; ++j) {
        const Ld sigma = std::sqrt(static_cast<Ld>(m.variances[k * d + j]));
        const Ld z = (x[j] - m.means[k * d + j]) / sigma;
        fv[static_cast<std::size_t>(k) * 2 * d + j] += q[k] * z / (n * std::sqrt(pi));
        fv[static_cast<std::size_t>(k) * 2 * d + d + j] += q[k] * (z * z - 1.0L) / (n * std::sqrt(2.0L * pi));
      }
    }
  }
  return fv;
}

inline void oracle_normalise(std::vector<Ld>& v, std::size_t begin, std::size_t end) {
  Ld ss = 0;
  for (std::size_t i = begin; i < end; ++i) ss += v[i] * v[i];
  if (ss == 0) return;
  const Ld norm = std::sqrt(ss);
  for (std::size_t i = begin; i < end; ++i) v[i] /= norm;
}

inline void oracle_signed_sqrt(std::vector<Ld>& v) {
  for (Ld& x : v) x = x < 0 ? -std::sqrt(-x) : std::sqrt(x);
}

inline std::vector<Ld> improve_oracle(std::vector<Ld> v, FisherNormalisation mode, int dim) {
  oracle_signed_sqrt(v);
  if (mode == FisherNormalisation::kClassicDoubleSqrt) {
    oracle_normalise(v, 0, v.size());
    oracle_signed_sqrt(v);
  } else {
    for (std::size_t b = 0; b < v.size(); b += 2 * static_cast<std::size_t>(dim)) oracle_normalise(v, b, b + 2 * dim);
  }
  oracle_normalise(v, 0, v.size());
  return v;
}

// Full encoding for every spatial scheme, pyramid cells improved one by one.
inline std::vector<double> fisher_oracle(const GmmModel& m, const DescriptorSet& descs, const FisherConfig& cfg,
                                         int w, int h) {
  std::vector<Ld> out;
  if (cfg.spatial == SpatialScheme::kPyramid) {
    for (int cell = 0; cell < 8; ++cell) {
      std::vector<const double*> members;
      for (std::size_t i = 0; i < descs.size(); ++i) {
        const Site& s = descs.sites[i];
        const int band = std::min(2, static_cast<int>(std::floor(3.0 * s.y / h)));
        const int col = std::min(1, static_cast<int>(std::floor(2.0 * s.x / w)));
        const int row = std::min(1, static_cast<int>(std::floor(2.0 * s.y / h)));
        const bool in = cell == 0 || (cell >= 1 && cell <= 3 && band == cell - 1) || (cell >= 4 && row * 2 + col == cell - 4);
        if (in) members.push_back(descs.row(i).data());
      }
      const auto part = improve_oracle(raw_fisher_oracle(m, members), cfg.normalisation, m.dim);
      out.insert(out.end(), part.begin(), part.end());
    }
    oracle_normalise(out, 0, out.size());
  } else if (cfg.spatial == SpatialScheme::kExtended) {
    std::vector<std::vector<double>> ext;
    for (std::size_t i = 0; i < descs.size(); ++i) {
      std::vector<double> x(descs.row(i).begin(), descs.row(i).end());
      x.push_back(descs.sites[i].x / w - 0.5);
      x.push_back(descs.sites[i].y / h - 0.5);
      ext.push_back(std::move(x));
    }
    std::vector<const double*> ptrs;
    for (const auto& x : ext) ptrs.push_back(x.data());
    out = improve_oracle(raw_fisher_oracle(m, ptrs), cfg.normalisation, m.dim);
  } else {
    std::vector<const double*> ptrs;
    for (std::size_t i = 0; i < descs.size(); ++i) ptrs.push_back(descs.row(i).data());
    out = improve_oracle(raw_fisher_oracle(m, ptrs), cfg.normalisation, m.dim);
  }
  return {out.begin(), out.end()};
}

// Precision summed at every positive, ranks by descending score with ties
// broken by input order.
inline double ap_oracle(const std::vector<double>& scores, const std::vector<bool>& pos) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) ++ahead;
    }
    rank[i] = ahead + 1;
  }
  Ld sum = 0;
  long npos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!pos[i]) continue;
    ++npos;
    long hits = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (pos[j] && rank[j] <= rank[i]) ++hits;
    }
    sum += static_cast<Ld>(hits) / rank[i];
  }
  return static_cast<double>(sum / npos);
}

// A sample is a miss when k or more classes beat its true class, counting
// equal scores at lower class indices as beating it.
inline double top_k_oracle(const std::vector<double>& scores, int classes, const std::vector<int>& truth, int k) {
  int misses = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double t = scores[i * classes + truth[i]];
    int better = 0;
    for (int c = 0; c < classes; ++c) {
      const double s = scores[i * classes + c];
      if (s > t || (s == t && c < truth[i])) ++better;
    }
    if (better >= k) ++misses;
  }
  return static_cast<double>(misses) / truth.size();
}

inline double mca_oracle(const std::vector<int>& pred, const std::vector<int>& truth, int classes) {
  Ld sum = 0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    int total = 0, right = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] != c) continue;
      ++total;
      right += pred[i] == c;
    }
    if (total == 0) continue;
    ++present;
    sum += static_cast<Ld>(right) / total;
  }
  return static_cast<double>(sum / present);
}

// Architecture transcription rows: arch, layer, filters/out_dim, kernel,
// stride, pad, lrn (or dropout / softmax for fully connected), pool.
struct ArchRow {
  std::string arch, layer, filters, kernel, stride, pad, lrn, pool;
};

inline std::vector<ArchRow> load_arch_table(const std::string& path) {
  std::ifstream in(path);
  std::vector<ArchRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ArchRow r;
    std::getline(ls, r.arch, '\t');
    std::getline(ls, r.layer, '\t');
    std::getline(ls, r.filters, '\t');
    std::getline(ls, r.kernel, '\t');
    std::getline(ls, r.stride, '\t');
    std::getline(ls, r.pad, '\t');
    std::getline(ls, r.lrn, '\t');
    std::getline(ls, r.pool, '\t');
    rows.push_back(r);
  }
  return rows;
}

// Summarises a built architecture in the transcription's row format.
inline std::vector<ArchRow> summarise(const cnn::ArchitectureSpec& spec) {
  using cnn::LayerKind;
  std::vector<ArchRow> rows;
  const auto& L = spec.layers;
  for (std::size_t i = 0; i < L.size(); ++i) {
    if (L[i].kind == LayerKind::kConv) {
      ArchRow r{spec.name, L[i].name, std::to_string(L[i].filters), std::to_string(L[i].kernel),
                std::to_string(L[i].stride), std::to_string(L[i].pad), "0", "0"};
      for (std::size_t j = i + 1; j < L.size() && L[j].kind != LayerKind::kConv && L[j].kind != LayerKind::kFullyConnected; ++j) {
        if (L[j].kind == LayerKind::kLrn) r.lrn = "1";
        if (L[j].kind == LayerKind::kMaxPool) r.pool = std::to_string(L[j].kernel);
      }
      rows.push_back(r);
    } else if (L[i].kind == LayerKind::kFullyConnected) {
      ArchRow r{spec.name, L[i].name, std::to_string(L[i].out_dim), "-", "-", "-", "-", "-"};
      for (std::size_t j = i + 1; j < L.size() && L[j].kind != LayerKind::kFullyConnected; ++j) {
        if (L[j].kind == LayerKind::kDropout) r.lrn = "dropout";
        if (L[j].kind == LayerKind::kSoftmax) r.lrn = "softmax";
      }
      rows.push_back(r);
    }
  }
  return rows;
}

inline bool operator==(const ArchRow& a, const ArchRow& b) {
  return a.arch == b.arch && a.layer == b.layer && a.filters == b.filters && a.kernel == b.kernel &&
         a.stride == b.stride && a.pad == b.pad && a.lrn == b.lrn && a.pool == b.pool;
}

// Central-difference check of one layer in isolation, in double precision.
// The loss is <r, output> for a fixed random r. Returns the worst relative
// error ||num - analytic|| / (||num|| + ||analytic||) over the input gradient
// and, for weighted layers, the weight and bias gradients.
inline double layer_gradient_error(const cnn::LayerSpec& layer, const cnn::TensorShape& input, int batch,
                                   std::uint64_t seed, double step = 1e-5) {
  using namespace cnn;
  ArchitectureSpec spec;
  spec.name = "probe";
  spec.input = input;
  spec.layers = {layer};
  spec.num_classes = 1;
  NetworkState<double> state = init_network<double>(spec, seed, 0.5);
  std::mt19937_64 rng(seed * 7919 + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : state.layers[0].bias) v = normal(rng) * 0.1;
  Tensor<double> x(batch, input);
  for (double& v : x.data) v = normal(rng);

  const std::uint64_t fwd_seed = seed + 99;
  Activations<double> acts = forward(state, spec, x, fwd_seed, kernels::Backend::kSerial);
  Tensor<double> r(batch, acts.outputs[0].shape());
  for (double& v : r.data) v = normal(rng);
  const Gradients<double> g = backward(state, spec, acts, 0, r, true, kernels::Backend::kSerial);

  const auto loss = [&](const NetworkState<double>& s, const Tensor<double>& in) {
    const auto a = forward(s, spec, in, fwd_seed, kernels::Backend::kSerial);
    Ld total = 0;
    for (std::size_t i = 0; i < r.data.size(); ++i) total += static_cast<Ld>(r.data[i]) * a.outputs[0].data[i];
    return static_cast<double>(total);
  };
  const auto rel = [](const std::vector<double>& num, const std::vector<double>& an) {
    Ld diff = 0, a = 0, b = 0;
    for (std::size_t i = 0; i < num.size(); ++i) {
      diff += (static_cast<Ld>(num[i]) - an[i]) * (static_cast<Ld>(num[i]) - an[i]);
      a += static_cast<Ld>(num[i]) * num[i];
      b += static_cast<Ld>(an[i]) * an[i];
    }
    const Ld denom = std::sqrt(a) + std::sqrt(b);
    return denom == 0 ? 0.0 : static_cast<double>(std::sqrt(diff) / denom);
  };

  std::vector<double> num(x.data.size());
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    Tensor<double> xp = x, xm = x;
    xp.data[i] += step;
    xm.data[i] -= step;
    num[i] = (loss(state, xp) - loss(state, xm)) / (2 * step);
  }
  double worst = rel(num, g.input.data);
  if (layer.has_weights()) {
    for (int which = 0; which < 2; ++which) {
      auto& params = which == 0 ? state.layers[0].weights : state.layers[0].bias;
      const auto& analytic = which == 0 ? g.weights[0] : g.bias[0];
      std::vector<double> pn(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + step;
        const double lp = loss(state, x);
        params[i] = keep - step;
        const double lm = loss(state, x);
        params[i] = keep;
        pn[i] = (lp - lm) / (2 * step);
      }
      worst = std::max(worst, rel(pn, analytic));
    }
  }
  return worst;
}

// Each layer kind with the input it is probed on.
inline std::vector<std::pair<cnn::LayerSpec, cnn::TensorShape>> gradient_probe_layers() {
  using cnn::LayerSpec;
  cnn::LrnParams strong;
  strong.alpha = 0.5;
  return {
      {LayerSpec::conv("conv", 4, 3, 1, 1), {5, 5, 3}},
      {LayerSpec::conv("conv_strided", 3, 3, 2, 0), {5, 5, 2}},
      {LayerSpec::relu("relu"), {5, 5, 3}},
      {LayerSpec::lrn_layer("lrn", strong), {5, 5, 7}},
      {LayerSpec::max_pool("pool", 2, 2), {5, 5, 3}},
      {LayerSpec::fully_connected("fc", 6), {5, 5, 2}},
      {LayerSpec::dropout("dropout", 0.5), {5, 5, 3}},
      {LayerSpec::softmax("softmax"), {1, 1, 8}},
  };
}

}  // namespace dvk::testing
