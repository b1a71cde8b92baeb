#pragma once

// Seeded synthetic multilabel corpus: each image shows one to three
// distinct shape classes in random colours on a noisy background. Every
// shape lies inside the central (size-8)×(size-8) window so all ten crop
// views keep it whole when crop = size - 8.

#include <array>
#include <cstdint>
#include <string_view>

#include "yftag/dataset.hpp"

namespace yftag::data {

inline constexpr int kShapeClasses = 8;

const std::array<std::string_view, kShapeClasses>& shape_class_names();

struct ShapesConfig {
  int count = 5000;
  int size = 72;
  int min_shapes = 1;
  int max_shapes = 3;
  std::uint64_t seed = 1;
  // Shape radius in pixels, drawn uniformly from [min_radius, max_radius].
  double min_radius = 9.0;
  double max_radius = 14.0;
};

Dataset generate_shapes(const ShapesConfig& config);

}  // namespace yftag::data
