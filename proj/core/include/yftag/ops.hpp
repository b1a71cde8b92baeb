#pragma once

// Forward and backward kernels for every layer in the network family.
// Backward kernels accumulate (+=) into the gradient tensors they are
// handed, so several consumers of one tensor compose without copies.
//
// Layouts: images are [N,C,H,W], flat features [N,F], conv kernels
// [Co,Ci,kh,kw], fc weights [out,in].

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "yftag/tensor.hpp"

namespace yftag::ops {

struct ConvParams {
  int stride = 1;
  int pad_top = 0;
  int pad_bottom = 0;
  int pad_left = 0;
  int pad_right = 0;

  static ConvParams valid(int stride = 1) { return ConvParams{stride}; }
  // TF-style SAME: output is ceil(in / stride), extra padding goes after.
  static ConvParams same(int in_h, int in_w, int kh, int kw, int stride = 1);

  int out_h(int in_h, int kh) const {
    return (in_h + pad_top + pad_bottom - kh) / stride + 1;
  }
  int out_w(int in_w, int kw) const {
    return (in_w + pad_left + pad_right - kw) / stride + 1;
  }
};

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x,
                              const BasicTensor<T>& kernel,
                              const ConvParams& p);
template <typename T>
void conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                     const ConvParams& p, const BasicTensor<T>& dy,
                     BasicTensor<T>* dx, BasicTensor<T>* dkernel);

// Pooling output plus, per output element, the flat input index that won.
template <typename T>
struct Pooled {
  BasicTensor<T> out;
  std::vector<std::int64_t> argmax;
};

// Ties resolve to the first maximal element in row-major window order.
template <typename T>
Pooled<T> max_pool_forward(const BasicTensor<T>& x, int window, int stride);

// Spatial pyramid max pooling. Bin i of an L-level grid spans rows
// floor(i*H/L) .. ceil((i+1)*H/L)-1 (same for columns). Output [N,
// C*Σ L²] is level-major: level, then channel, then bin row, bin col.
template <typename T>
Pooled<T> spp_forward(const BasicTensor<T>& x, std::span<const int> levels);

// Routes dy back through the argmax indices of max_pool or spp.
template <typename T>
void route_backward(const BasicTensor<T>& dy,
                    std::span<const std::int64_t> argmax, BasicTensor<T>* dx);

template <typename T>
struct BatchNormCache {
  BasicTensor<T> normalized;  // (x - mean) * inv_std
  std::vector<T> inv_std;     // per channel
};

// Normalizes per channel (dim 1) over batch and all trailing dims, and
// folds the batch statistics into running_mean/var:
//   running = momentum * running + (1 - momentum) * batch
// with the unbiased batch variance.
template <typename T>
BasicTensor<T> batch_norm_train(const BasicTensor<T>& x,
                                const BasicTensor<T>& gamma,
                                const BasicTensor<T>& beta, T epsilon,
                                T momentum, BasicTensor<T>* running_mean,
                                BasicTensor<T>* running_var,
                                BatchNormCache<T>* cache);

template <typename T>
BasicTensor<T> batch_norm_infer(const BasicTensor<T>& x,
                                const BasicTensor<T>& gamma,
                                const BasicTensor<T>& beta,
                                const BasicTensor<T>& running_mean,
                                const BasicTensor<T>& running_var, T epsilon);

template <typename T>
void batch_norm_backward(const BasicTensor<T>& dy,
                         const BatchNormCache<T>& cache,
                         const BasicTensor<T>& gamma, BasicTensor<T>* dx,
                         BasicTensor<T>* dgamma, BasicTensor<T>* dbeta);

template <typename T>
BasicTensor<T> fully_connected_forward(const BasicTensor<T>& x,
                                       const BasicTensor<T>& weight);
template <typename T>
void fully_connected_backward(const BasicTensor<T>& x,
                              const BasicTensor<T>& weight,
                              const BasicTensor<T>& dy, BasicTensor<T>* dx,
                              BasicTensor<T>* dweight);

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x);
template <typename T>
void relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& dy,
                   BasicTensor<T>* dx);

// Keep-mask scaled by 1/(1-rate); all ones when rate is 0.
template <typename T>
BasicTensor<T> dropout_mask(const Shape& shape, double rate,
                            std::mt19937_64& rng);

template <typename T>
BasicTensor<T> sigmoid_forward(const BasicTensor<T>& x);

// Mean cross-entropy over the batch of logits [N,V] against one target
// per row; max-subtracted for stability. `grad` (if given) receives
// d(loss)/d(logits), already divided by N.
template <typename T>
T softmax_cross_entropy(const BasicTensor<T>& logits,
                        std::span<const int> targets, BasicTensor<T>* grad);

// Scalar helpers shared with the multilabel and calibration code.
double sigmoid(double x);
// ln Σ exp(v), max-subtracted.
double log_sum_exp(std::span<const double> v);

}  // namespace yftag::ops
