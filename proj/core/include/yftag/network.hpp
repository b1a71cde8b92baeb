#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "yftag/arch.hpp"
#include "yftag/autograd.hpp"
#include "yftag/head_config.hpp"
#include "yftag/tensor.hpp"

namespace yftag::net {

using ag::Mode;

struct TrainConfig {
  int batch_size = 256;
  double base_lr = 0.01;
  // The rate is divided by this factor every lr_decay_every epochs.
  double lr_decay_factor = 10.0;
  int lr_decay_every = 20;
  int total_epochs = 90;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// base_lr / decay_factor^floor(epoch / decay_every)
double lr_at(const TrainConfig& config, int epoch);

// v <- momentum*v + grad + weight_decay*w (decay only for decaying
// parameters); w <- w - lr*v. Throws NumericError on a non-finite result.
template <typename T>
void sgd_update(BasicParameter<T>& p, double lr, double momentum,
                double weight_decay);

// A LayerPlan made concrete: parameters, batchnorm statistics, forward.
class Network {
 public:
  // He-normal weights (variance 2/fan_in), gamma 1, beta 0.
  Network(arch::LayerPlan plan, std::uint64_t init_seed);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  // `batch` is [N,C,H,W] matching the plan's input geometry. Returns the
  // logits variable [N, num_classes].
  ag::Var forward(ag::Tape<float>& tape, const Tensor& batch, Mode mode,
                  std::mt19937_64& rng);

  // Inference-mode logits, no gradient bookkeeping kept.
  Tensor predict(const Tensor& batch);

  const arch::LayerPlan& plan() const { return plan_; }
  int num_classes() const { return plan_.head.num_classes; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::int64_t parameter_count() const;

  void zero_grad();
  // One SGD step over every parameter at lr_at(config, epoch).
  void sgd_step(const TrainConfig& config, int epoch);

  // Every tensor a checkpoint must hold: parameter values and momentum
  // buffers plus batchnorm running statistics, in a fixed order.
  std::vector<std::pair<std::string, Tensor*>> state_tensors();

 private:
  struct Unit {
    int weight = -1;  // conv/fc weight, or batchnorm gamma
    int beta = -1;
    int norm = -1;    // index into norms_
  };

  arch::LayerPlan plan_;
  std::vector<Parameter> params_;
  std::vector<ag::BatchNormState<float>> norms_;
  std::vector<Unit> units_;
};

// Checks plan and head agree, then builds the network.
Network build_network(const arch::LayerPlan& plan, const HeadConfig& head,
                      std::uint64_t init_seed);

// Ten fixed crops: 0 center, 1 top-left, 2 top-right, 3 bottom-left,
// 4 bottom-right; 5..9 are the same crops mirrored horizontally.
inline constexpr int kNumViews = 10;

// Crop `view` of size crop×crop from `image` [C,H,W].
Tensor crop_view(const Tensor& image, int crop, int view);

// Train mode draws one of the ten views uniformly; test mode returns the
// center crop. `view_out`, when given, receives the chosen view.
Tensor augment(const Tensor& image, Mode mode, int crop, std::mt19937_64& rng,
               int* view_out = nullptr);

// Uniform integer in [0, n).
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);

}  // namespace yftag::net
