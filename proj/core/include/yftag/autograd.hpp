#pragma once

// Reverse-mode differentiation over a recorded op tape.
//
// Each op evaluates eagerly, appends its result to the tape together with
// a closure that maps the result's gradient onto its inputs' gradients,
// and returns a handle. backward() replays the closures newest-first.

#include <cstddef>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "yftag/error.hpp"
#include "yftag/ops.hpp"
#include "yftag/tensor.hpp"

namespace yftag::ag {

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

enum class Mode { train, infer };

template <typename T>
class Tape {
 public:
  using TensorT = BasicTensor<T>;
  using BackwardFn = std::function<void(Tape&, const TensorT& out_grad)>;

  // A value that never receives a gradient.
  Var constant(TensorT value) { return push(std::move(value), false, {}, nullptr); }

  // A leaf whose gradient is readable through grad() after backward().
  Var variable(TensorT value) { return push(std::move(value), true, {}, nullptr); }

  // A leaf backed by `p.value` (not copied). backward() adds the leaf's
  // gradient into p.grad.
  Var parameter(BasicParameter<T>& p) {
    Node n;
    n.ref = &p.value;
    n.requires_grad = true;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  Var record(TensorT value, bool requires_grad, BackwardFn fn,
             std::string_view op) {
    value.check_finite(op);
    return push(std::move(value), requires_grad, std::move(fn), nullptr);
  }

  const TensorT& value(Var v) const { return node(v).value(); }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  // Gradient after backward(); an all-zero tensor when nothing reached v.
  const TensorT& grad(Var v) {
    Node& n = node(v);
    if (n.grad.empty() && !n.value().empty()) n.grad = TensorT(n.value().shape());
    return n.grad;
  }

  // Zero-initialised on first use; nullptr for values without gradient.
  TensorT* grad_buffer(Var v) {
    Node& n = node(v);
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad = TensorT(n.value().shape());
    return &n.grad;
  }

  void backward(Var scalar) {
    const TensorT& v = value(scalar);
    if (v.size() != 1) {
      throw ShapeError("backward(): output must be a scalar, got " +
                       shape_string(v.shape()));
    }
    backward(scalar, TensorT(v.shape(), T(1)));
  }

  void backward(Var output, const TensorT& seed) {
    if (seed.shape() != value(output).shape()) {
      throw ShapeError("backward(): seed shape " + shape_string(seed.shape()) +
                       " does not match output " +
                       shape_string(value(output).shape()));
    }
    TensorT* g = grad_buffer(output);
    if (!g) return;
    for (std::size_t i = 0; i < seed.size(); ++i) (*g)[i] += seed[i];
    for (std::size_t i = output.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
      n.backward(*this, n.grad);
    }
    for (Node& n : nodes_) {
      if (!n.param || n.grad.empty()) continue;
      auto& pg = n.param->grad;
      if (pg.empty()) pg = TensorT(n.param->value.shape());
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorT owned;
    const TensorT* ref = nullptr;
    TensorT grad;
    bool requires_grad = false;
    BackwardFn backward;
    BasicParameter<T>* param = nullptr;
    const TensorT& value() const { return ref ? *ref : owned; }
  };

  Var push(TensorT value, bool requires_grad, BackwardFn fn,
           BasicParameter<T>* param) {
    Node n;
    n.owned = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(fn);
    n.param = param;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  Node& node(Var v) {
    if (v.id >= nodes_.size()) throw Error("tape: invalid variable handle");
    return nodes_[v.id];
  }
  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw Error("tape: invalid variable handle");
    return nodes_[v.id];
  }

  std::deque<Node> nodes_;
};

template <typename T>
struct BatchNormState {
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  T epsilon = T(1e-5);
  T momentum = T(0.9);

  explicit BatchNormState(int channels = 0)
      : running_mean({channels}, T(0)), running_var({channels}, T(1)) {}
};

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var kernel, const ops::ConvParams& params);

template <typename T>
Var max_pool(Tape<T>& tape, Var x, int window, int stride);

template <typename T>
Var spp(Tape<T>& tape, Var x, const std::vector<int>& levels);

// Train mode normalizes with batch statistics and updates `state`; infer
// mode uses the running statistics.
template <typename T>
Var batch_norm(Tape<T>& tape, Var x, Var gamma, Var beta,
               BatchNormState<T>& state, Mode mode);

template <typename T>
Var fully_connected(Tape<T>& tape, Var x, Var weight);

template <typename T>
Var relu(Tape<T>& tape, Var x);

// Identity in infer mode or when rate is 0.
template <typename T>
Var dropout(Tape<T>& tape, Var x, double rate, Mode mode,
            std::mt19937_64& rng);

template <typename T>
Var sigmoid(Tape<T>& tape, Var x);

// [N, ...] -> [N, prod(...)]
template <typename T>
Var flatten(Tape<T>& tape, Var x);

// Scalar mean cross-entropy of logits [N,V] against `targets`.
template <typename T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, std::vector<int> targets);

// Scalar Σ x ⊙ weights; turns any tensor output into a checkable loss.
template <typename T>
Var weighted_sum(Tape<T>& tape, Var x, BasicTensor<T> weights);

}  // namespace yftag::ag
