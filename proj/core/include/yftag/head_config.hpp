#pragma once

#include <vector>

namespace yftag {

// Classifier head appended after the last convolutional stage:
// SPP -> hidden fc layers (each with batchnorm, relu, dropout) -> logits.
struct HeadConfig {
  std::vector<int> spp_levels{6, 3, 2, 1};
  std::vector<int> hidden_fc_widths{4096, 4096};
  double dropout_rate = 0.2;
  int num_classes = 1000;

  // Throws yftag::Error when a field is out of range.
  void validate() const;

  // Σ level² over spp_levels; 50 for the default pyramid.
  int spp_bins() const;

  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

}  // namespace yftag
