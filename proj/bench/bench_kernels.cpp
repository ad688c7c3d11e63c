// Serial reference vs OpenMP kernels. Run with --benchmark_filter to pick one.
#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "dvk/cnn/train.hpp"
#include "dvk/kernels.hpp"

using dvk::kernels::Backend;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> v(n);
  for (double& x : v) x = z(rng);
  return v;
}

Backend backend_of(const benchmark::State& state) { return state.range(0) ? Backend::kOpenMP : Backend::kSerial; }

void BM_Gemm(benchmark::State& state) {
  const int n = static_cast<int>(state.range(1));
  const auto a = random_vector(std::size_t(n) * n, 1), b = random_vector(std::size_t(n) * n, 2);
  std::vector<double> c(std::size_t(n) * n);
  for (auto _ : state) {
    dvk::kernels::gemm<double>(backend_of(state), false, false, n, n, n, 1.0, a.data(), n, b.data(), n, 0.0,
                               c.data(), n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}

struct Mixture {
  int k, d;
  std::vector<double> means, inv_sigma, log_norm;
  Mixture(int k_, int d_) : k(k_), d(d_), means(random_vector(std::size_t(k_) * d_, 3)), inv_sigma(std::size_t(k_) * d_, 1.0), log_norm(k_) {
    for (int i = 0; i < k; ++i) log_norm[i] = -std::log(double(k)) - 0.5 * d * std::log(2 * M_PI);
  }
  dvk::kernels::MixtureView view() const { return {k, d, means, inv_sigma, log_norm}; }
};

void BM_Posteriors(benchmark::State& state) {
  const Mixture mix(256, 80);
  const int n = static_cast<int>(state.range(1));
  const auto x = random_vector(std::size_t(n) * mix.d, 4);
  std::vector<double> q(std::size_t(n) * mix.k), ll(n);
  for (auto _ : state) {
    dvk::kernels::posteriors(backend_of(state), mix.view(), x, q, ll);
    benchmark::DoNotOptimize(q.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

void BM_AccumulateMoments(benchmark::State& state) {
  const Mixture mix(256, 80);
  const int n = static_cast<int>(state.range(1));
  const auto x = random_vector(std::size_t(n) * mix.d, 5);
  std::vector<double> q(std::size_t(n) * mix.k), ll(n);
  dvk::kernels::posteriors(Backend::kSerial, mix.view(), x, q, ll);
  std::vector<double> s0(mix.k), s1(mix.means.size()), s2(mix.means.size());
  for (auto _ : state) {
    dvk::kernels::accumulate_moments(backend_of(state), mix.k, mix.d, x, q, mix.means, mix.inv_sigma, 1e-6, s0, s1,
                                     s2);
    benchmark::DoNotOptimize(s1.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

void BM_MicroNetForward(benchmark::State& state) {
  using namespace dvk::cnn;
  const ArchitectureSpec spec = scaled_architecture(build_architecture("CNN-F"), 8, 64, 10);
  NetworkState<float> net = init_network<float>(spec, 1);
  net.mode = Mode::kEval;
  Tensor<float> batch(static_cast<int>(state.range(1)), spec.input);
  std::mt19937_64 rng(6);
  std::normal_distribution<float> z;
  for (float& v : batch.data) v = z(rng);
  for (auto _ : state) {
    auto acts = forward(net, spec, batch, 0, backend_of(state));
    benchmark::DoNotOptimize(acts.outputs.back().data.data());
  }
  state.SetItemsProcessed(state.iterations() * batch.n);
}

}  // namespace

BENCHMARK(BM_Gemm)->ArgNames({"omp", "n"})->ArgsProduct({{0, 1}, {128, 256}});
BENCHMARK(BM_Posteriors)->ArgNames({"omp", "n"})->ArgsProduct({{0, 1}, {4096}});
BENCHMARK(BM_AccumulateMoments)->ArgNames({"omp", "n"})->ArgsProduct({{0, 1}, {4096}});
BENCHMARK(BM_MicroNetForward)->ArgNames({"omp", "batch"})->ArgsProduct({{0, 1}, {16}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
