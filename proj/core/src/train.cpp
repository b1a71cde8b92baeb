#include "yftag/train.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "yftag/checkpoint.hpp"
#include "yftag/error.hpp"
#include "yftag/eval.hpp"

namespace yftag::train {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void copy_into(Tensor& batch, std::size_t row, const Tensor& item) {
  std::copy(item.raw(), item.raw() + item.size(), batch.raw() + row * item.size());
}

}  // namespace

void AugmentConfig::validate() const {
  if (crop_size < 1) throw Error("augment: crop_size must be positive");
  if (base_size < crop_size) {
    throw Error("augment: crop " + std::to_string(crop_size) +
                " larger than base size " + std::to_string(base_size));
  }
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                     int epoch) {
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(std::uint64_t(epoch))));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[net::uniform_index(rng, i)]);
  }
  return order;
}

Tensor prepare_image(const Image& image, const AugmentConfig& augment) {
  if (image.height == augment.base_size && image.width == augment.base_size) {
    return image_to_tensor(image);
  }
  return image_to_tensor(
      resize_bilinear(image, augment.base_size, augment.base_size));
}

Trainer::Trainer(net::Network& network, net::TrainConfig config,
                 AugmentConfig augment, multilabel::LossFn loss)
    : network_(network),
      config_(config),
      augment_(augment),
      loss_(std::move(loss)),
      rng_(splitmix64(config.seed)) {
  config_.validate();
  augment_.validate();
  const auto& in = network_.plan().input;
  if (in.height != augment_.crop_size || in.width != augment_.crop_size) {
    throw ShapeError("trainer: crop " + std::to_string(augment_.crop_size) +
                     " does not match network input " +
                     std::to_string(in.height) + "x" + std::to_string(in.width));
  }
}

EpochMetrics Trainer::run_epoch(const data::Dataset& data,
                                const TrainOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  EpochMetrics m;
  m.epoch = epoch_;
  m.lr = net::lr_at(config_, epoch_);
  const int v = network_.num_classes();
  if (data.num_classes() != v) {
    throw ShapeError("trainer: dataset has " +
                     std::to_string(data.num_classes()) +
                     " classes, network " + std::to_string(v));
  }
  std::vector<std::size_t> usable;
  for (std::size_t i : epoch_order(data.examples.size(), config_.seed, epoch_)) {
    if (data.examples[i].positives.empty()) {
      ++m.skipped;
    } else {
      usable.push_back(i);
    }
  }
  const int channels = network_.plan().input.channels;
  const int crop = augment_.crop_size;
  double loss_sum = 0;
  for (std::size_t first = 0; first < usable.size();
       first += std::size_t(config_.batch_size)) {
    const std::size_t size =
        std::min<std::size_t>(config_.batch_size, usable.size() - first);
    // Batchnorm needs two samples.
    if (size < 2) break;
    Tensor batch({int(size), channels, crop, crop});
    std::vector<std::vector<int>> positives(size);
    for (std::size_t b = 0; b < size; ++b) {
      const auto& ex = data.examples[usable[first + b]];
      if (ex.image.channels != channels) {
        throw ShapeError("trainer: example " + ex.id + " has " +
                         std::to_string(ex.image.channels) + " channels");
      }
      copy_into(batch, b,
                net::augment(prepare_image(ex.image, augment_), net::Mode::train,
                             crop, rng_));
      positives[b] = ex.positives;
    }
    network_.zero_grad();
    ag::Tape<float> tape;
    ag::Var logits = network_.forward(tape, batch, net::Mode::train, rng_);
    auto loss = loss_(tape.value(logits), positives, rng_);
    if (!std::isfinite(loss.loss)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch_) +
                         ", batch starting at example " +
                         std::to_string(first));
    }
    tape.backward(logits, loss.grad);
    network_.sgd_step(config_, epoch_);
    loss_sum += loss.loss * double(size);
    m.examples += int(size);
  }
  m.train_loss = m.examples ? loss_sum / m.examples : 0.0;
  ++epoch_;
  if (options.validation) {
    m.validation_map = evaluate_map(network_, *options.validation, augment_);
  }
  if (!options.checkpoint_dir.empty()) {
    namespace fs = std::filesystem;
    save_checkpoint((fs::path(options.checkpoint_dir) / "last.ckpt").string());
    if (options.keep_all) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch-%04d.ckpt", epoch_);
      save_checkpoint((fs::path(options.checkpoint_dir) / name).string());
    }
  }
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            start)
                  .count();
  if (options.on_epoch) options.on_epoch(m);
  return m;
}

std::vector<EpochMetrics> Trainer::run(const data::Dataset& data,
                                       const TrainOptions& options) {
  std::vector<EpochMetrics> out;
  while (epoch_ < config_.total_epochs) out.push_back(run_epoch(data, options));
  return out;
}

std::string Trainer::rng_state() const {
  std::ostringstream os;
  os << rng_;
  return os.str();
}

void Trainer::restore(int completed_epochs, const std::string& rng_state) {
  if (completed_epochs < 0) throw Error("restore: negative epoch");
  std::istringstream is(rng_state);
  std::mt19937_64 rng;
  is >> rng;
  if (!is) throw Error("restore: malformed generator state");
  rng_ = rng;
  epoch_ = completed_epochs;
}

void Trainer::save_checkpoint(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  ckpt::save(path, network_, {config_, augment_, epoch_, rng_state()});
}

Tensor predict_logits(net::Network& network, const data::Dataset& data,
                      const AugmentConfig& augment, int batch_size) {
  if (batch_size < 1) throw Error("predict: batch size must be positive");
  const int n = static_cast<int>(data.examples.size());
  const int v = network.num_classes();
  const int channels = network.plan().input.channels;
  const int crop = augment.crop_size;
  Tensor out({n, v});
  std::mt19937_64 unused(0);
  for (int first = 0; first < n; first += batch_size) {
    const int size = std::min(batch_size, n - first);
    Tensor batch({size, channels, crop, crop});
    for (int b = 0; b < size; ++b) {
      copy_into(batch, b,
                net::augment(prepare_image(data.examples[first + b].image, augment),
                             net::Mode::infer, crop, unused));
    }
    Tensor logits = network.predict(batch);
    std::copy(logits.raw(), logits.raw() + logits.size(),
              out.raw() + std::size_t(first) * v);
  }
  return out;
}

double evaluate_map(net::Network& network, const data::Dataset& data,
                    const AugmentConfig& augment, int batch_size) {
  const auto labels = data.labels();
  return eval::mean_ap(predict_logits(network, data, augment, batch_size),
                       labels);
}

}  // namespace yftag::train
