#include <benchmark/benchmark.h>

#include <random>

#include "yftag/ops.hpp"

using namespace yftag;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = normal(rng);
  return t;
}

// Args: spatial size, channels, filter height, filter width.
void BM_Conv2dForward(benchmark::State& state) {
  const int size = int(state.range(0)), ch = int(state.range(1));
  const int kh = int(state.range(2)), kw = int(state.range(3));
  auto x = random_tensor({8, ch, size, size}, 1);
  auto k = random_tensor({ch, ch, kh, kw}, 2);
  const auto p = ops::ConvParams::same(size, size, kh, kw);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d_forward(x, k, p));
  state.counters["MAC/s"] = benchmark::Counter(
      double(8) * size * size * kh * kw * ch * ch, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Conv2dForward)
    ->Args({18, 16, 3, 3})
    ->Args({18, 16, 1, 3})
    ->Args({18, 16, 3, 1})
    ->Args({6, 64, 3, 3})
    ->Unit(benchmark::kMicrosecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const int size = int(state.range(0)), ch = int(state.range(1));
  auto x = random_tensor({8, ch, size, size}, 1);
  auto k = random_tensor({ch, ch, 3, 3}, 2);
  const auto p = ops::ConvParams::same(size, size, 3, 3);
  auto dy = random_tensor({8, ch, size, size}, 3);
  for (auto _ : state) {
    Tensor dx(x.shape()), dk(k.shape());
    ops::conv2d_backward(x, k, p, dy, &dx, &dk);
    benchmark::DoNotOptimize(dx.raw());
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({18, 16})->Unit(benchmark::kMicrosecond);

void BM_Spp(benchmark::State& state) {
  const int size = int(state.range(0));
  auto x = random_tensor({8, 64, size, size}, 4);
  const std::vector<int> levels{6, 3, 2, 1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(ops::spp_forward(x, std::span<const int>(levels)));
  }
}
BENCHMARK(BM_Spp)->Arg(6)->Arg(13)->Arg(36);

}  // namespace
