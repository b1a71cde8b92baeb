#include <benchmark/benchmark.h>

#include <random>

#include "yftag/eval.hpp"

using namespace yftag;

namespace {

void BM_AveragePrecision(benchmark::State& state) {
  const auto n = std::size_t(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> scores(n);
  std::vector<bool> relevant(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = unit(rng);
    relevant[i] = unit(rng) < 0.1;
  }
  relevant[0] = true;
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval::average_precision(scores, relevant));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AveragePrecision)->RangeMultiplier(10)->Range(100, 1000000)->Complexity();

}  // namespace
