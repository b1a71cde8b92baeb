#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "yftag/autograd.hpp"

namespace yftag {

// Builds a scalar loss from tape variables wrapping `inputs`, in order.
using GradClosure =
    std::function<ag::Var(ag::Tape<double>&, std::span<const ag::Var>)>;

struct GradCheckOptions {
  double step = 1e-5;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|,
  // denominator_floor); the floor keeps near-zero entries from reporting
  // pure rounding noise as error.
  double denominator_floor = 1e-3;
  // Elements for which skip(input_index, element_index, value) is true are
  // left out, e.g. inputs sitting on a relu kink.
  std::function<bool(std::size_t, std::size_t, double)> skip;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  // "input i[j]: analytic a numeric n" for the worst element.
  std::string worst;
  bool passed = false;
};

// Compares tape gradients of `f` against central differences with respect
// to every element of every input. Throws NumericError if a loss
// evaluation is not finite.
GradCheckReport gradient_check(const GradClosure& f,
                               std::vector<TensorD> inputs, double tolerance,
                               const GradCheckOptions& options = {});

}  // namespace yftag
