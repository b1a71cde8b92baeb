#include "yftag/multilabel.hpp"

#include <algorithm>
#include <cmath>

#include "yftag/error.hpp"
#include "yftag/network.hpp"
#include "yftag/ops.hpp"

namespace yftag::multilabel {

LabelSet make_label_set(std::vector<int> positives, int vocabulary_size) {
  std::sort(positives.begin(), positives.end());
  for (std::size_t i = 0; i < positives.size(); ++i) {
    if (positives[i] < 0 || positives[i] >= vocabulary_size) {
      throw Error("label index " + std::to_string(positives[i]) +
                  " outside vocabulary of " + std::to_string(vocabulary_size));
    }
    if (i > 0 && positives[i] == positives[i - 1]) {
      throw Error("duplicate label index " + std::to_string(positives[i]));
    }
  }
  return LabelSet{std::move(positives)};
}

namespace {

void require_vector(const TensorD& logits) {
  if (logits.rank() != 1 || logits.size() == 0) {
    throw ShapeError("logits must be a non-empty vector, got " +
                     shape_string(logits.shape()));
  }
}

void require_nonempty(const LabelSet& labels) {
  if (labels.positives.empty()) throw Error("empty label set");
}

}  // namespace

double cross_entropy(const TensorD& logits, int target) {
  require_vector(logits);
  if (target < 0 || std::size_t(target) >= logits.size()) {
    throw Error("target index out of range");
  }
  return ops::log_sum_exp(logits.data()) - logits[target];
}

SampledLoss randomized_softmax_loss(const TensorD& logits,
                                    const LabelSet& labels,
                                    std::mt19937_64& rng) {
  require_vector(logits);
  require_nonempty(labels);
  SampledLoss out;
  out.chosen = labels.positives[net::uniform_index(rng, labels.positives.size())];
  if (std::size_t(out.chosen) >= logits.size()) {
    throw Error("label index outside logits");
  }
  const double lse = ops::log_sum_exp(logits.data());
  out.loss = lse - logits[out.chosen];
  out.grad = TensorD(logits.shape());
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out.grad[j] = std::exp(logits[j] - lse) - (int(j) == out.chosen ? 1.0 : 0.0);
  }
  return out;
}

double expected_loss_oracle(const TensorD& logits, const LabelSet& labels) {
  require_vector(logits);
  require_nonempty(labels);
  double sum = 0;
  for (int t : labels.positives) sum += cross_entropy(logits, t);
  return sum / labels.positives.size();
}

double posterior(double logit, double bias) { return ops::sigmoid(logit + bias); }

double logit_of(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("probability must be in (0, 1)");
  return std::log(p / (1.0 - p));
}

BatchLoss randomized_softmax_batch(const Tensor& logits,
                                   std::span<const std::vector<int>> positives,
                                   std::mt19937_64& rng) {
  if (logits.rank() != 2 || std::size_t(logits.dim(0)) != positives.size()) {
    throw ShapeError("randomized_softmax_batch: one label set per logit row");
  }
  std::vector<int> targets(positives.size());
  for (std::size_t i = 0; i < positives.size(); ++i) {
    if (positives[i].empty()) throw Error("empty label set in batch");
    targets[i] = positives[i][net::uniform_index(rng, positives[i].size())];
  }
  BatchLoss out;
  out.grad = Tensor(logits.shape());
  out.loss = ops::softmax_cross_entropy(logits, targets, &out.grad);
  return out;
}

std::vector<std::vector<int>> delete_positives(
    std::span<const std::vector<int>> labels, double fraction,
    std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error("deletion fraction must be in [0, 1]");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> out;
  out.reserve(labels.size());
  for (const auto& row : labels) {
    std::vector<int> kept;
    for (int t : row) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      if (u >= fraction) kept.push_back(t);
    }
    out.push_back(std::move(kept));
  }
  return out;
}

double mean_positives_per_item(std::span<const std::vector<int>> labels) {
  if (labels.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& row : labels) total += row.size();
  return double(total) / labels.size();
}

}  // namespace yftag::multilabel
