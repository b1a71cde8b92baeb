#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "yftag/arch.hpp"

namespace yftag::complexity {

// One multiply-add is one op. Only conv and fc layers do arithmetic under
// this convention; batchnorm contributes its affine parameters only.
struct LayerCost {
  int index = 0;
  arch::LayerKind kind = arch::LayerKind::conv;
  std::int64_t ops = 0;
  std::int64_t params = 0;
};

struct ComplexityReport {
  std::vector<LayerCost> per_layer;
  std::int64_t total_ops = 0;
  std::int64_t total_params = 0;
};

ComplexityReport count_complexity(const arch::LayerPlan& plan);

// ops(1x3 then 3x1) / ops(3x3) for a block mapping in_ch -> out_ch on a
// height×width map. Exactly 2/3 when in_ch == out_ch.
double factorization_ratio(int in_ch, int out_ch, const arch::Geometry& spatial);

struct RankedArch {
  std::string name;
  std::int64_t total_ops = 0;
  std::int64_t total_params = 0;
};

// Sorted by total_ops, largest first. Equal totals keep input order.
std::vector<RankedArch> compare_architectures(
    const std::vector<arch::ArchSpec>& specs, const arch::Geometry& input,
    const HeadConfig& head);

// "layer,kind,ops,params" rows, header first.
std::string to_csv(const ComplexityReport& report);

// Human-readable table with per-layer rows and a totals line in millions.
std::string to_table(const ComplexityReport& report,
                     const arch::LayerPlan& plan);

}  // namespace yftag::complexity
