#include "yftag/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace yftag {
namespace {

double evaluate(const GradClosure& f, const std::vector<TensorD>& inputs) {
  ag::Tape<double> tape;
  std::vector<ag::Var> vars;
  vars.reserve(inputs.size());
  for (const auto& in : inputs) vars.push_back(tape.constant(in));
  const auto& out = tape.value(f(tape, vars));
  if (out.size() != 1) throw ShapeError("gradient_check: loss must be scalar");
  if (!std::isfinite(out[0])) {
    throw NumericError("gradient_check: non-finite loss");
  }
  return out[0];
}

}  // namespace

GradCheckReport gradient_check(const GradClosure& f,
                               std::vector<TensorD> inputs, double tolerance,
                               const GradCheckOptions& options) {
  std::vector<TensorD> analytic;
  {
    ag::Tape<double> tape;
    std::vector<ag::Var> vars;
    for (const auto& in : inputs) vars.push_back(tape.variable(in));
    ag::Var loss = f(tape, vars);
    tape.backward(loss);
    for (auto v : vars) analytic.push_back(tape.grad(v));
  }

  GradCheckReport report;
  const double h = options.step;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k][i];
      if (options.skip && options.skip(k, i, x0)) {
        ++report.skipped;
        continue;
      }
      inputs[k][i] = x0 + h;
      const double up = evaluate(f, inputs);
      inputs[k][i] = x0 - h;
      const double down = evaluate(f, inputs);
      inputs[k][i] = x0;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[k][i];
      if (!std::isfinite(a)) {
        throw NumericError("gradient_check: non-finite analytic gradient");
      }
      const double denom = std::max(
          {std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_relative_error || report.worst.empty()) {
        report.max_relative_error = std::max(rel, report.max_relative_error);
        if (rel >= report.max_relative_error) {
          std::ostringstream s;
          s << "input " << k << "[" << i << "]: analytic " << a
            << " numeric " << numeric;
          report.worst = s.str();
        }
      }
    }
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

}  // namespace yftag
