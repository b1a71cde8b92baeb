#pragma once

// Epoch loop: deterministic shuffling keyed on (seed, epoch), one random
// crop view per image per visit, the batch loss, SGD, and a checkpoint
// after every epoch.

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "yftag/dataset.hpp"
#include "yftag/multilabel.hpp"
#include "yftag/network.hpp"

namespace yftag::train {

struct AugmentConfig {
  // Images are resampled to base_size×base_size, then cropped.
  int base_size = 256;
  int crop_size = 221;

  void validate() const;
  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean over trained examples
  std::optional<double> validation_map;
  int examples = 0;
  int skipped = 0;  // examples without a positive tag
  double seconds = 0.0;
};

struct TrainOptions {
  // Empty: no checkpoints. Otherwise "last.ckpt" is rewritten after each
  // epoch, plus "epoch-NNNN.ckpt" when keep_all is set.
  std::string checkpoint_dir;
  bool keep_all = false;
  const data::Dataset* validation = nullptr;
  std::function<void(const EpochMetrics&)> on_epoch;
};

// Order of example indices for `epoch`: a Fisher-Yates shuffle driven by a
// generator seeded from (seed, epoch) alone.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                     int epoch);

class Trainer {
 public:
  Trainer(net::Network& network, net::TrainConfig config,
          AugmentConfig augment,
          multilabel::LossFn loss = multilabel::randomized_softmax_batch);

  // Runs the next epoch over `data`.
  EpochMetrics run_epoch(const data::Dataset& data,
                         const TrainOptions& options = {});

  // Runs epochs until config.total_epochs have completed.
  std::vector<EpochMetrics> run(const data::Dataset& data,
                                const TrainOptions& options = {});

  int epoch() const { return epoch_; }
  const net::TrainConfig& config() const { return config_; }
  const AugmentConfig& augment() const { return augment_; }

  // Generator state as text, for checkpoints.
  std::string rng_state() const;
  // Continue as if `completed_epochs` had just finished with `rng_state`.
  void restore(int completed_epochs, const std::string& rng_state);

  void save_checkpoint(const std::string& path);

 private:
  net::Network& network_;
  net::TrainConfig config_;
  AugmentConfig augment_;
  multilabel::LossFn loss_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
};

// Center-crop, inference-mode logits [N, V] for every example.
Tensor predict_logits(net::Network& network, const data::Dataset& data,
                      const AugmentConfig& augment, int batch_size = 64);

// Center-crop validation mAP over the dataset's classes.
double evaluate_map(net::Network& network, const data::Dataset& data,
                    const AugmentConfig& augment, int batch_size = 64);

// [C,H,W] tensor of `image` resampled to the configured base size.
Tensor prepare_image(const Image& image, const AugmentConfig& augment);

}  // namespace yftag::train
