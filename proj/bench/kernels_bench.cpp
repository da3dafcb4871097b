// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "ulca/kernels.hpp"

namespace {

struct Fixture {
  Eigen::MatrixXd X;
  std::vector<int> labels;
  Eigen::MatrixXd M;
};

const Fixture& fixture(int n, int d) {
  static std::vector<std::pair<std::pair<int, int>, Fixture>> cache;
  for (const auto& [key, f] : cache) {
    if (key.first == n && key.second == d) return f;
  }
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal;
  Fixture f;
  f.X = Eigen::MatrixXd::NullaryExpr(n, d, [&] { return normal(rng); });
  f.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) f.labels[static_cast<std::size_t>(i)] = i % 3;
  f.M = Eigen::MatrixXd::NullaryExpr(d, 2, [&] { return normal(rng); });
  cache.push_back({{n, d}, std::move(f)});
  return cache.back().second;
}

void BM_GroupMomentsSerial(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(ulca::kernels::group_moments_serial(f.X, f.labels, 3));
}

void BM_GroupMomentsParallel(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(ulca::kernels::group_moments(f.X, f.labels, 3));
  state.counters["threads"] = ulca::kernels::max_threads();
}

void BM_ProjectSerial(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(ulca::kernels::project_serial(f.X, f.M));
}

void BM_ProjectParallel(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(ulca::kernels::project(f.X, f.M));
  state.counters["threads"] = ulca::kernels::max_threads();
}

void sizes(benchmark::internal::Benchmark* b) {
  b->Args({1000, 10})->Args({10000, 100})->Args({50000, 100})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_GroupMomentsSerial)->Apply(sizes);
BENCHMARK(BM_GroupMomentsParallel)->Apply(sizes);
BENCHMARK(BM_ProjectSerial)->Apply(sizes);
BENCHMARK(BM_ProjectParallel)->Apply(sizes);

BENCHMARK_MAIN();
