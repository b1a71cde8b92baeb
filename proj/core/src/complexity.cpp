#include "yftag/complexity.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace yftag::complexity {

using arch::LayerKind;

ComplexityReport count_complexity(const arch::LayerPlan& plan) {
  ComplexityReport report;
  report.per_layer.reserve(plan.layers.size());
  for (std::size_t i = 0; i < plan.layers.size(); ++i) {
    const arch::Layer& l = plan.layers[i];
    LayerCost cost;
    cost.index = static_cast<int>(i);
    cost.kind = l.kind;
    switch (l.kind) {
      case LayerKind::conv: {
        std::int64_t weights = std::int64_t{l.filter_h} * l.filter_w *
                               l.in_channels * l.out_channels;
        cost.params = weights;
        cost.ops = std::int64_t{l.out_h} * l.out_w * weights;
        break;
      }
      case LayerKind::fc:
        cost.params = std::int64_t{l.in_channels} * l.out_channels;
        cost.ops = cost.params;
        break;
      case LayerKind::batchnorm:
        cost.params = 2 * std::int64_t{l.out_channels};
        break;
      case LayerKind::pool:
      case LayerKind::spp:
      case LayerKind::relu:
      case LayerKind::dropout:
        break;
    }
    report.total_ops += cost.ops;
    report.total_params += cost.params;
    report.per_layer.push_back(cost);
  }
  return report;
}

double factorization_ratio(int in_ch, int out_ch,
                           const arch::Geometry& spatial) {
  const std::int64_t area = std::int64_t{spatial.height} * spatial.width;
  // 1x3 maps in_ch -> out_ch, then 3x1 maps out_ch -> out_ch.
  const std::int64_t factored =
      area * 3 * in_ch * out_ch + area * 3 * std::int64_t{out_ch} * out_ch;
  const std::int64_t square = area * 9 * std::int64_t{in_ch} * out_ch;
  return static_cast<double>(factored) / static_cast<double>(square);
}

std::vector<RankedArch> compare_architectures(
    const std::vector<arch::ArchSpec>& specs, const arch::Geometry& input,
    const HeadConfig& head) {
  std::vector<RankedArch> rows;
  rows.reserve(specs.size());
  for (const auto& spec : specs) {
    auto report = count_complexity(arch::expand_layers(spec, input, head));
    rows.push_back({spec.name, report.total_ops, report.total_params});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const RankedArch& a, const RankedArch& b) {
                     return a.total_ops > b.total_ops;
                   });
  return rows;
}

std::string to_csv(const ComplexityReport& report) {
  std::ostringstream out;
  out << "layer,kind,ops,params\n";
  for (const auto& c : report.per_layer) {
    out << c.index << ',' << arch::to_string(c.kind) << ',' << c.ops << ','
        << c.params << '\n';
  }
  return out.str();
}

std::string to_table(const ComplexityReport& report,
                     const arch::LayerPlan& plan) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%5s %-9s %5s %16s %9s %14s %12s\n",
                "layer", "kind", "stage", "in", "filter", "ops", "params");
  out << line;
  for (const auto& c : report.per_layer) {
    const arch::Layer& l = plan.layers[c.index];
    if (l.kind == LayerKind::relu || l.kind == LayerKind::dropout) continue;
    char in[48];
    std::snprintf(in, sizeof in, "%dx%dx%d", l.in_h, l.in_w, l.in_channels);
    char filter[24] = "";
    if (l.kind == LayerKind::conv || l.kind == LayerKind::pool) {
      std::snprintf(filter, sizeof filter, "%dx%d/%d", l.filter_h, l.filter_w,
                    l.stride);
    }
    std::snprintf(line, sizeof line, "%5d %-9s %5d %16s %9s %14lld %12lld\n",
                  c.index, std::string(arch::to_string(c.kind)).c_str(),
                  l.stage, in, filter, static_cast<long long>(c.ops),
                  static_cast<long long>(c.params));
    out << line;
  }
  std::snprintf(line, sizeof line, "total: %.1fM multiply-adds, %.2fM params\n",
                report.total_ops / 1e6, report.total_params / 1e6);
  out << line;
  return out.str();
}

}  // namespace yftag::complexity
