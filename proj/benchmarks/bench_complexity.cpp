#include <benchmark/benchmark.h>

#include <string>

#include "yftag/arch.hpp"
#include "yftag/complexity.hpp"

using namespace yftag;

namespace {

const std::string kDir = std::string(YFTAG_BENCH_DATA_DIR) + "/arch/";

void BM_ParseArch(benchmark::State& state) {
  const std::string text =
      "(7,96)/2+3/3; (1x3+3x1,128)x2+2/2; (1x3+3x1,256)x3+3/3; "
      "(1x3+3x1,512)x2+(1x3+3x1,256)";
  for (auto _ : state) benchmark::DoNotOptimize(arch::parse_arch("D", text));
}
BENCHMARK(BM_ParseArch);

void BM_CountComplexity(benchmark::State& state) {
  const auto spec = arch::load_arch_file(kDir + "yfnet_d.arch");
  for (auto _ : state) {
    auto plan = arch::expand_layers(spec, {221, 221, 3}, HeadConfig{});
    benchmark::DoNotOptimize(complexity::count_complexity(plan));
  }
}
BENCHMARK(BM_CountComplexity);

void BM_CompareFamily(benchmark::State& state) {
  std::vector<arch::ArchSpec> specs;
  for (auto n : {"ctc_a", "ctc_j", "yfnet_a", "yfnet_b", "yfnet_c", "yfnet_d"}) {
    specs.push_back(arch::load_arch_file(kDir + n + ".arch"));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        complexity::compare_architectures(specs, {221, 221, 3}, HeadConfig{}));
  }
}
BENCHMARK(BM_CompareFamily);

}  // namespace
