#include "yftag/autograd.hpp"

#include <cmath>
#include <memory>

namespace yftag::ag {

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var kernel, const ops::ConvParams& params) {
  auto out = ops::conv2d_forward(tape.value(x), tape.value(kernel), params);
  const bool rg = tape.requires_grad(x) || tape.requires_grad(kernel);
  return tape.record(
      std::move(out), rg,
      [x, kernel, params](Tape<T>& t, const BasicTensor<T>& g) {
        ops::conv2d_backward(t.value(x), t.value(kernel), params, g,
                             t.grad_buffer(x), t.grad_buffer(kernel));
      },
      "conv2d");
}

template <typename T>
Var max_pool(Tape<T>& tape, Var x, int window, int stride) {
  auto pooled = ops::max_pool_forward(tape.value(x), window, stride);
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      std::move(pooled.argmax));
  return tape.record(
      std::move(pooled.out), tape.requires_grad(x),
      [x, argmax](Tape<T>& t, const BasicTensor<T>& g) {
        ops::route_backward(g, *argmax, t.grad_buffer(x));
      },
      "max_pool");
}

template <typename T>
Var spp(Tape<T>& tape, Var x, const std::vector<int>& levels) {
  auto pooled = ops::spp_forward(tape.value(x), levels);
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      std::move(pooled.argmax));
  return tape.record(
      std::move(pooled.out), tape.requires_grad(x),
      [x, argmax](Tape<T>& t, const BasicTensor<T>& g) {
        ops::route_backward(g, *argmax, t.grad_buffer(x));
      },
      "spp");
}

template <typename T>
Var batch_norm(Tape<T>& tape, Var x, Var gamma, Var beta,
               BatchNormState<T>& state, Mode mode) {
  const bool rg = tape.requires_grad(x) || tape.requires_grad(gamma) ||
                  tape.requires_grad(beta);
  if (mode == Mode::train) {
    auto cache = std::make_shared<ops::BatchNormCache<T>>();
    auto out = ops::batch_norm_train(
        tape.value(x), tape.value(gamma), tape.value(beta), state.epsilon,
        state.momentum, &state.running_mean, &state.running_var, cache.get());
    return tape.record(
        std::move(out), rg,
        [x, gamma, beta, cache](Tape<T>& t, const BasicTensor<T>& g) {
          ops::batch_norm_backward(g, *cache, t.value(gamma),
                                   t.grad_buffer(x), t.grad_buffer(gamma),
                                   t.grad_buffer(beta));
        },
        "batch_norm");
  }
  auto out = ops::batch_norm_infer(tape.value(x), tape.value(gamma),
                                   tape.value(beta), state.running_mean,
                                   state.running_var, state.epsilon);
  // Infer mode is an affine map per channel.
  auto mean = state.running_mean;
  auto var = state.running_var;
  const T eps = state.epsilon;
  return tape.record(
      std::move(out), rg,
      [x, gamma, beta, mean, var, eps](Tape<T>& t, const BasicTensor<T>& g) {
        const auto& xv = t.value(x);
        const auto& gv = t.value(gamma);
        const int c = xv.dim(1);
        const std::size_t spatial = xv.size() / (std::size_t(xv.dim(0)) * c);
        auto* dx = t.grad_buffer(x);
        auto* dg = t.grad_buffer(gamma);
        auto* db = t.grad_buffer(beta);
        for (int n = 0; n < xv.dim(0); ++n) {
          for (int ch = 0; ch < c; ++ch) {
            const T inv = T(1) / std::sqrt(var[ch] + eps);
            const std::size_t off = (std::size_t(n) * c + ch) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) {
              if (dx) (*dx)[off + i] += g[off + i] * gv[ch] * inv;
              if (dg) (*dg)[ch] += g[off + i] * (xv[off + i] - mean[ch]) * inv;
              if (db) (*db)[ch] += g[off + i];
            }
          }
        }
      },
      "batch_norm");
}

template <typename T>
Var fully_connected(Tape<T>& tape, Var x, Var weight) {
  auto out = ops::fully_connected_forward(tape.value(x), tape.value(weight));
  const bool rg = tape.requires_grad(x) || tape.requires_grad(weight);
  return tape.record(
      std::move(out), rg,
      [x, weight](Tape<T>& t, const BasicTensor<T>& g) {
        ops::fully_connected_backward(t.value(x), t.value(weight), g,
                                      t.grad_buffer(x), t.grad_buffer(weight));
      },
      "fully_connected");
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  return tape.record(
      ops::relu_forward(tape.value(x)), tape.requires_grad(x),
      [x](Tape<T>& t, const BasicTensor<T>& g) {
        ops::relu_backward(t.value(x), g, t.grad_buffer(x));
      },
      "relu");
}

template <typename T>
Var dropout(Tape<T>& tape, Var x, double rate, Mode mode,
            std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error("dropout: rate must be in [0, 1)");
  }
  if (mode == Mode::infer || rate == 0.0) return x;
  const auto& xv = tape.value(x);
  auto mask = std::make_shared<BasicTensor<T>>(
      ops::dropout_mask<T>(xv.shape(), rate, rng));
  BasicTensor<T> out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * (*mask)[i];
  return tape.record(
      std::move(out), tape.requires_grad(x),
      [x, mask](Tape<T>& t, const BasicTensor<T>& g) {
        auto* dx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i] * (*mask)[i];
      },
      "dropout");
}

template <typename T>
Var sigmoid(Tape<T>& tape, Var x) {
  auto out = ops::sigmoid_forward(tape.value(x));
  return tape.record(
      std::move(out), tape.requires_grad(x),
      [x](Tape<T>& t, const BasicTensor<T>& g) {
        const auto& xv = t.value(x);
        auto* dx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = ops::sigmoid(xv[i]);
          (*dx)[i] += static_cast<T>(g[i] * s * (1.0 - s));
        }
      },
      "sigmoid");
}

template <typename T>
Var flatten(Tape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  if (xv.rank() == 2) return x;
  const int n = xv.dim(0);
  const int f = static_cast<int>(xv.size() / std::size_t(n));
  return tape.record(
      xv.reshaped({n, f}), tape.requires_grad(x),
      [x](Tape<T>& t, const BasicTensor<T>& g) {
        auto* dx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i];
      },
      "flatten");
}

template <typename T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, std::vector<int> targets) {
  auto grad = std::make_shared<BasicTensor<T>>(tape.value(logits).shape());
  const T loss = ops::softmax_cross_entropy(tape.value(logits), targets,
                                            grad.get());
  return tape.record(
      BasicTensor<T>({1}, loss), tape.requires_grad(logits),
      [logits, grad](Tape<T>& t, const BasicTensor<T>& g) {
        auto* dl = t.grad_buffer(logits);
        for (std::size_t i = 0; i < grad->size(); ++i) {
          (*dl)[i] += g[0] * (*grad)[i];
        }
      },
      "softmax_cross_entropy");
}

template <typename T>
Var weighted_sum(Tape<T>& tape, Var x, BasicTensor<T> weights) {
  const auto& xv = tape.value(x);
  if (weights.size() != xv.size()) {
    throw ShapeError("weighted_sum: weights have " +
                     std::to_string(weights.size()) + " entries, input has " +
                     std::to_string(xv.size()));
  }
  double s = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += double(xv[i]) * weights[i];
  auto w = std::make_shared<BasicTensor<T>>(std::move(weights));
  return tape.record(
      BasicTensor<T>({1}, static_cast<T>(s)), tape.requires_grad(x),
      [x, w](Tape<T>& t, const BasicTensor<T>& g) {
        auto* dx = t.grad_buffer(x);
        for (std::size_t i = 0; i < w->size(); ++i) (*dx)[i] += g[0] * (*w)[i];
      },
      "weighted_sum");
}

#define YFTAG_INSTANTIATE_AG(T)                                              \
  template Var conv2d(Tape<T>&, Var, Var, const ops::ConvParams&);           \
  template Var max_pool(Tape<T>&, Var, int, int);                            \
  template Var spp(Tape<T>&, Var, const std::vector<int>&);                  \
  template Var batch_norm(Tape<T>&, Var, Var, Var, BatchNormState<T>&, Mode); \
  template Var fully_connected(Tape<T>&, Var, Var);                          \
  template Var relu(Tape<T>&, Var);                                          \
  template Var dropout(Tape<T>&, Var, double, Mode, std::mt19937_64&);       \
  template Var sigmoid(Tape<T>&, Var);                                       \
  template Var flatten(Tape<T>&, Var);                                       \
  template Var softmax_cross_entropy(Tape<T>&, Var, std::vector<int>);       \
  template Var weighted_sum(Tape<T>&, Var, BasicTensor<T>);

YFTAG_INSTANTIATE_AG(float)
YFTAG_INSTANTIATE_AG(double)

#undef YFTAG_INSTANTIATE_AG

}  // namespace yftag::ag
