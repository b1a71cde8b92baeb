#pragma once

// Training signal for images that carry a set of positive tags, most of
// the true ones missing: each visit samples one positive uniformly and
// applies ordinary softmax cross-entropy against it.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "yftag/tensor.hpp"

namespace yftag::multilabel {

// Sorted, duplicate-free tag indices.
struct LabelSet {
  std::vector<int> positives;
  friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

// Sorts and validates `positives` against the vocabulary size; throws on
// duplicates or out-of-range indices.
LabelSet make_label_set(std::vector<int> positives, int vocabulary_size);

struct SampledLoss {
  double loss = 0.0;
  TensorD grad;  // d(loss)/d(logits), shape [V]
  int chosen = -1;
};

double cross_entropy(const TensorD& logits, int target);

// Draws the target uniformly from `labels` using `rng`. Throws on an empty
// label set.
SampledLoss randomized_softmax_loss(const TensorD& logits,
                                    const LabelSet& labels,
                                    std::mt19937_64& rng);

// Exact expectation of randomized_softmax_loss over the draw.
double expected_loss_oracle(const TensorD& logits, const LabelSet& labels);

// Calibrated posterior: 1 / (1 + exp(-logit - bias)).
double posterior(double logit, double bias);

// Inverse of posterior in its first argument: the logit that maps to p
// when bias is zero.
double logit_of(double p);

// Batch form used by the trainer.
struct BatchLoss {
  double loss = 0.0;  // mean over rows
  Tensor grad;        // [N,V], already scaled by 1/N
};

using LossFn = std::function<BatchLoss(
    const Tensor& logits, std::span<const std::vector<int>> positives,
    std::mt19937_64& rng)>;

// Samples one target per row, then mean softmax cross-entropy.
BatchLoss randomized_softmax_batch(const Tensor& logits,
                                   std::span<const std::vector<int>> positives,
                                   std::mt19937_64& rng);

// Deletes each positive label independently with probability `fraction`
// (missing-label noise). Rows may end up empty.
std::vector<std::vector<int>> delete_positives(
    std::span<const std::vector<int>> labels, double fraction,
    std::uint64_t seed);

double mean_positives_per_item(std::span<const std::vector<int>> labels);

}  // namespace yftag::multilabel
