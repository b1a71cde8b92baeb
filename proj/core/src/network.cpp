#include "yftag/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "yftag/error.hpp"

namespace yftag::net {

using arch::LayerKind;

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error("train: batch_size must be positive");
  if (!(base_lr > 0)) throw Error("train: base_lr must be positive");
  if (!(lr_decay_factor > 0)) {
    throw Error("train: lr_decay_factor must be positive");
  }
  if (lr_decay_every < 1) throw Error("train: lr_decay_every must be positive");
  if (total_epochs < 0) throw Error("train: total_epochs must be >= 0");
  if (momentum < 0 || momentum >= 1) {
    throw Error("train: momentum must be in [0, 1)");
  }
  if (weight_decay < 0) throw Error("train: weight_decay must be >= 0");
}

double lr_at(const TrainConfig& config, int epoch) {
  if (epoch < 0) throw Error("lr_at: epoch must be >= 0");
  return config.base_lr /
         std::pow(config.lr_decay_factor, epoch / config.lr_decay_every);
}

template <typename T>
void sgd_update(BasicParameter<T>& p, double lr, double momentum,
                double weight_decay) {
  p.ensure_buffers();
  const T m = static_cast<T>(momentum);
  const T wd = p.weight_decay ? static_cast<T>(weight_decay) : T(0);
  const T rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    T v = m * p.momentum[i] + p.grad[i] + wd * p.value[i];
    T w = p.value[i] - rate * v;
    if (!std::isfinite(v) || !std::isfinite(w)) {
      throw NumericError("sgd: non-finite update for " + p.name);
    }
    p.momentum[i] = v;
    p.value[i] = w;
  }
}

template void sgd_update(BasicParameter<float>&, double, double, double);
template void sgd_update(BasicParameter<double>&, double, double, double);

namespace {

Tensor he_normal(const Shape& shape, int fan_in, std::mt19937_64& rng) {
  Tensor t(shape);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<float>(normal(rng));
  }
  return t;
}

}  // namespace

Network::Network(arch::LayerPlan plan, std::uint64_t init_seed)
    : plan_(std::move(plan)) {
  std::mt19937_64 rng(init_seed);
  units_.resize(plan_.layers.size());
  for (std::size_t i = 0; i < plan_.layers.size(); ++i) {
    const arch::Layer& l = plan_.layers[i];
    const std::string prefix = "layer" + std::to_string(i);
    Unit& u = units_[i];
    switch (l.kind) {
      case LayerKind::conv: {
        const int fan_in = l.in_channels * l.filter_h * l.filter_w;
        u.weight = static_cast<int>(params_.size());
        params_.emplace_back(
            prefix + ".conv.weight",
            he_normal({l.out_channels, l.in_channels, l.filter_h, l.filter_w},
                      fan_in, rng),
            true);
        break;
      }
      case LayerKind::fc:
        u.weight = static_cast<int>(params_.size());
        params_.emplace_back(
            prefix + ".fc.weight",
            he_normal({l.out_channels, l.in_channels}, l.in_channels, rng),
            true);
        break;
      case LayerKind::batchnorm:
        u.weight = static_cast<int>(params_.size());
        params_.emplace_back(prefix + ".bn.gamma",
                             Tensor({l.out_channels}, 1.0f), false);
        u.beta = static_cast<int>(params_.size());
        params_.emplace_back(prefix + ".bn.beta", Tensor({l.out_channels}),
                             false);
        u.norm = static_cast<int>(norms_.size());
        norms_.emplace_back(l.out_channels);
        break;
      default:
        break;
    }
  }
}

Network build_network(const arch::LayerPlan& plan, const HeadConfig& head,
                      std::uint64_t init_seed) {
  head.validate();
  if (!(plan.head == head)) {
    throw ShapeError("network: head config does not match the layer plan");
  }
  if (plan.layers.empty() || plan.layers.back().kind != LayerKind::fc ||
      plan.layers.back().out_channels != head.num_classes) {
    throw ShapeError("network: plan does not end in a " +
                     std::to_string(head.num_classes) + "-way logits layer");
  }
  return Network(plan, init_seed);
}

ag::Var Network::forward(ag::Tape<float>& tape, const Tensor& batch, Mode mode,
                         std::mt19937_64& rng) {
  const arch::Geometry& in = plan_.input;
  if (batch.rank() != 4 || batch.dim(1) != in.channels ||
      batch.dim(2) != in.height || batch.dim(3) != in.width) {
    throw ShapeError("network input " + shape_string(batch.shape()) +
                     " does not match plan geometry " +
                     std::to_string(in.height) + "x" +
                     std::to_string(in.width) + "x" +
                     std::to_string(in.channels));
  }
  ag::Var x = tape.constant(batch);
  for (std::size_t i = 0; i < plan_.layers.size(); ++i) {
    const arch::Layer& l = plan_.layers[i];
    const Unit& u = units_[i];
    switch (l.kind) {
      case LayerKind::conv: {
        ops::ConvParams p;
        p.stride = l.stride;
        p.pad_top = l.padding.top;
        p.pad_bottom = l.padding.bottom;
        p.pad_left = l.padding.left;
        p.pad_right = l.padding.right;
        x = ag::conv2d(tape, x, tape.parameter(params_[u.weight]), p);
        break;
      }
      case LayerKind::pool:
        x = ag::max_pool(tape, x, l.filter_h, l.stride);
        break;
      case LayerKind::spp:
        x = ag::spp(tape, x, plan_.head.spp_levels);
        break;
      case LayerKind::fc:
        x = ag::fully_connected(tape, ag::flatten(tape, x),
                                tape.parameter(params_[u.weight]));
        break;
      case LayerKind::batchnorm:
        x = ag::batch_norm(tape, x, tape.parameter(params_[u.weight]),
                           tape.parameter(params_[u.beta]), norms_[u.norm],
                           mode);
        break;
      case LayerKind::relu:
        x = ag::relu(tape, x);
        break;
      case LayerKind::dropout:
        x = ag::dropout(tape, x, l.dropout_rate, mode, rng);
        break;
    }
  }
  return x;
}

Tensor Network::predict(const Tensor& batch) {
  ag::Tape<float> tape;
  std::mt19937_64 unused(0);
  return tape.value(forward(tape, batch, Mode::infer, unused));
}

std::int64_t Network::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += static_cast<std::int64_t>(p.value.size());
  return n;
}

void Network::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Network::sgd_step(const TrainConfig& config, int epoch) {
  const double lr = lr_at(config, epoch);
  for (auto& p : params_) {
    sgd_update(p, lr, config.momentum, config.weight_decay);
  }
}

std::vector<std::pair<std::string, Tensor*>> Network::state_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (auto& p : params_) {
    p.ensure_buffers();
    out.emplace_back(p.name, &p.value);
    out.emplace_back(p.name + ".momentum", &p.momentum);
  }
  for (std::size_t i = 0; i < units_.size(); ++i) {
    if (units_[i].norm < 0) continue;
    auto& s = norms_[units_[i].norm];
    const std::string prefix = "layer" + std::to_string(i) + ".bn.";
    out.emplace_back(prefix + "running_mean", &s.running_mean);
    out.emplace_back(prefix + "running_var", &s.running_var);
  }
  return out;
}

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw Error("uniform_index: empty range");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

Tensor crop_view(const Tensor& image, int crop, int view) {
  if (image.rank() != 3) {
    throw ShapeError("crop_view: image must be [C,H,W], got " +
                     shape_string(image.shape()));
  }
  if (view < 0 || view >= kNumViews) throw Error("crop_view: bad view index");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (crop > h || crop > w || crop < 1) {
    throw ShapeError("crop " + std::to_string(crop) + " larger than image " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  int top = 0, left = 0;
  switch (view % 5) {
    case 0:
      top = (h - crop) / 2;
      left = (w - crop) / 2;
      break;
    case 1:
      break;
    case 2:
      left = w - crop;
      break;
    case 3:
      top = h - crop;
      break;
    case 4:
      top = h - crop;
      left = w - crop;
      break;
  }
  const bool flip = view >= 5;
  Tensor out({c, crop, crop});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < crop; ++y) {
      const float* src = image.raw() + (std::size_t(ch) * h + top + y) * w + left;
      float* dst = out.raw() + (std::size_t(ch) * crop + y) * crop;
      if (flip) {
        for (int x = 0; x < crop; ++x) dst[x] = src[crop - 1 - x];
      } else {
        std::copy(src, src + crop, dst);
      }
    }
  }
  return out;
}

Tensor augment(const Tensor& image, Mode mode, int crop, std::mt19937_64& rng,
               int* view_out) {
  const int view =
      mode == Mode::train ? static_cast<int>(uniform_index(rng, kNumViews)) : 0;
  if (view_out) *view_out = view;
  return crop_view(image, crop, view);
}

}  // namespace yftag::net
