#include <random>

#include <benchmark/benchmark.h>

#include "hoptrace/assignment.hpp"

namespace {

hoptrace::WeightMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  hoptrace::WeightMatrix w(rows, std::vector<double>(cols));
  for (auto& r : w) {
    for (double& x : r) x = u(rng);
  }
  return w;
}

void BM_MaxWeightMatching(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto w = random_matrix(n, n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(hoptrace::max_weight_matching(w));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MaxWeightMatching)->RangeMultiplier(2)->Range(2, 128)->Complexity(benchmark::oNCubed);

void BM_MaxWeightMatchingRect(benchmark::State& state) {
  const auto w = random_matrix(6, static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(hoptrace::max_weight_matching(w));
}
BENCHMARK(BM_MaxWeightMatchingRect)->Arg(1)->Arg(3)->Arg(6)->Arg(12);

}  // namespace

BENCHMARK_MAIN();
