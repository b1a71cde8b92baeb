#include "yftag/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "yftag/error.hpp"

namespace yftag::ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

void require(bool cond, const std::string& what) {
  if (!cond) throw ShapeError(what);
}

template <typename T>
void require_rank(const BasicTensor<T>& t, int rank, const char* op) {
  require(t.rank() == rank, std::string(op) + ": expected rank " +
                                std::to_string(rank) + ", got " +
                                shape_string(t.shape()));
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b,
                        const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
}

struct ConvDims {
  int n, c, h, w, co, kh, kw, oh, ow;
  std::size_t k() const { return std::size_t(c) * kh * kw; }
  std::size_t p() const { return std::size_t(oh) * ow; }
};

template <typename T>
ConvDims conv_dims(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                   const ConvParams& p) {
  require_rank(x, 4, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  require(p.stride >= 1, "conv2d: stride must be >= 1");
  ConvDims d{x.dim(0),      x.dim(1),      x.dim(2),
             x.dim(3),      kernel.dim(0), kernel.dim(2),
             kernel.dim(3), 0,             0};
  require(kernel.dim(1) == d.c,
          "conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
              " input channels, input has " + std::to_string(d.c));
  d.oh = p.out_h(d.h, d.kh);
  d.ow = p.out_w(d.w, d.kw);
  require(d.oh >= 1 && d.ow >= 1, "conv2d: output would be empty");
  return d;
}

// col[(c*kh + i)*kw + j][oy*ow + ox] = x[c][oy*s - pt + i][ox*s - pl + j]
template <typename T>
void im2col(const T* x, const ConvDims& d, const ConvParams& p, T* col) {
  for (int c = 0; c < d.c; ++c) {
    const T* plane = x + std::size_t(c) * d.h * d.w;
    for (int i = 0; i < d.kh; ++i) {
      for (int j = 0; j < d.kw; ++j) {
        T* row = col + ((std::size_t(c) * d.kh + i) * d.kw + j) * d.p();
        for (int oy = 0; oy < d.oh; ++oy) {
          const int y = oy * p.stride - p.pad_top + i;
          T* dst = row + std::size_t(oy) * d.ow;
          if (y < 0 || y >= d.h) {
            std::fill(dst, dst + d.ow, T(0));
            continue;
          }
          const T* src = plane + std::size_t(y) * d.w;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int xx = ox * p.stride - p.pad_left + j;
            dst[ox] = (xx >= 0 && xx < d.w) ? src[xx] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvDims& d, const ConvParams& p, T* dx) {
  for (int c = 0; c < d.c; ++c) {
    T* plane = dx + std::size_t(c) * d.h * d.w;
    for (int i = 0; i < d.kh; ++i) {
      for (int j = 0; j < d.kw; ++j) {
        const T* row = col + ((std::size_t(c) * d.kh + i) * d.kw + j) * d.p();
        for (int oy = 0; oy < d.oh; ++oy) {
          const int y = oy * p.stride - p.pad_top + i;
          if (y < 0 || y >= d.h) continue;
          const T* src = row + std::size_t(oy) * d.ow;
          T* dst = plane + std::size_t(y) * d.w;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int xx = ox * p.stride - p.pad_left + j;
            if (xx >= 0 && xx < d.w) dst[xx] += src[ox];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvDims& d, const ConvParams& p) {
  return d.kh == 1 && d.kw == 1 && p.stride == 1 && p.pad_top == 0 &&
         p.pad_bottom == 0 && p.pad_left == 0 && p.pad_right == 0;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

ConvParams ConvParams::same(int in_h, int in_w, int kh, int kw, int stride) {
  ConvParams p;
  p.stride = stride;
  const int oh = (in_h + stride - 1) / stride;
  const int ow = (in_w + stride - 1) / stride;
  const int ph = std::max((oh - 1) * stride + kh - in_h, 0);
  const int pw = std::max((ow - 1) * stride + kw - in_w, 0);
  p.pad_top = ph / 2;
  p.pad_bottom = ph - ph / 2;
  p.pad_left = pw / 2;
  p.pad_right = pw - pw / 2;
  return p;
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x,
                              const BasicTensor<T>& kernel,
                              const ConvParams& p) {
  const ConvDims d = conv_dims(x, kernel, p);
  BasicTensor<T> out({d.n, d.co, d.oh, d.ow});
  CMapMat<T> w(kernel.raw(), d.co, d.k());
  const bool pointwise = is_pointwise(d, p);
  std::vector<T> col(pointwise ? 0 : d.k() * d.p());
  for (int n = 0; n < d.n; ++n) {
    const T* xn = x.raw() + std::size_t(n) * d.c * d.h * d.w;
    const T* src = xn;
    if (!pointwise) {
      im2col(xn, d, p, col.data());
      src = col.data();
    }
    MapMat<T> y(out.raw() + std::size_t(n) * d.co * d.p(), d.co, d.p());
    y.noalias() = w * CMapMat<T>(src, d.k(), d.p());
  }
  return out;
}

template <typename T>
void conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                     const ConvParams& p, const BasicTensor<T>& dy,
                     BasicTensor<T>* dx, BasicTensor<T>* dkernel) {
  const ConvDims d = conv_dims(x, kernel, p);
  require(dy.shape() == Shape({d.n, d.co, d.oh, d.ow}),
          "conv2d backward: dy shape " + shape_string(dy.shape()));
  if (dx) require_same_shape(*dx, x, "conv2d backward dx");
  if (dkernel) require_same_shape(*dkernel, kernel, "conv2d backward dkernel");
  CMapMat<T> w(kernel.raw(), d.co, d.k());
  const bool pointwise = is_pointwise(d, p);
  std::vector<T> col(pointwise ? 0 : d.k() * d.p());
  RowMat<T> dcol;
  for (int n = 0; n < d.n; ++n) {
    const std::size_t in_off = std::size_t(n) * d.c * d.h * d.w;
    CMapMat<T> g(dy.raw() + std::size_t(n) * d.co * d.p(), d.co, d.p());
    if (dkernel) {
      const T* src = x.raw() + in_off;
      if (!pointwise) {
        im2col(src, d, p, col.data());
        src = col.data();
      }
      MapMat<T> dw(dkernel->raw(), d.co, d.k());
      dw.noalias() += g * CMapMat<T>(src, d.k(), d.p()).transpose();
    }
    if (dx) {
      if (pointwise) {
        MapMat<T> dxn(dx->raw() + in_off, d.k(), d.p());
        dxn.noalias() += w.transpose() * g;
      } else {
        dcol.noalias() = w.transpose() * g;
        col2im_add(dcol.data(), d, p, dx->raw() + in_off);
      }
    }
  }
}

template <typename T>
Pooled<T> max_pool_forward(const BasicTensor<T>& x, int window, int stride) {
  require_rank(x, 4, "max_pool");
  require(window >= 1 && stride >= 1, "max_pool: window and stride >= 1");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(window <= h && window <= w,
          "max_pool: window " + std::to_string(window) +
              " larger than input " + shape_string(x.shape()));
  const int oh = (h - window) / stride + 1;
  const int ow = (w - window) / stride + 1;
  Pooled<T> r{BasicTensor<T>({n, c, oh, ow}), {}};
  r.argmax.resize(r.out.size());
  std::size_t o = 0;
  for (int plane = 0; plane < n * c; ++plane) {
    const std::size_t base = std::size_t(plane) * h * w;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = base + std::size_t(oy * stride) * w + ox * stride;
        T best_v = x[best];
        for (int i = 0; i < window; ++i) {
          for (int j = 0; j < window; ++j) {
            const std::size_t idx =
                base + std::size_t(oy * stride + i) * w + ox * stride + j;
            if (x[idx] > best_v) {
              best_v = x[idx];
              best = idx;
            }
          }
        }
        r.out[o] = best_v;
        r.argmax[o] = static_cast<std::int64_t>(best);
      }
    }
  }
  return r;
}

template <typename T>
Pooled<T> spp_forward(const BasicTensor<T>& x, std::span<const int> levels) {
  require_rank(x, 4, "spp");
  require(!levels.empty(), "spp: empty level list");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(h >= 1 && w >= 1 && c >= 1, "spp: zero-size input");
  int bins = 0;
  for (int level : levels) {
    require(level >= 1, "spp: levels must be >= 1");
    bins += level * level;
  }
  const int features = c * bins;
  Pooled<T> r{BasicTensor<T>({n, features}), {}};
  r.argmax.resize(r.out.size());
  for (int s = 0; s < n; ++s) {
    std::size_t o = std::size_t(s) * features;
    for (int level : levels) {
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t base = (std::size_t(s) * c + ch) * h * w;
        for (int bi = 0; bi < level; ++bi) {
          const int r0 = bi * h / level;
          const int r1 = ((bi + 1) * h + level - 1) / level;
          for (int bj = 0; bj < level; ++bj, ++o) {
            const int c0 = bj * w / level;
            const int c1 = ((bj + 1) * w + level - 1) / level;
            std::size_t best = base + std::size_t(r0) * w + c0;
            T best_v = x[best];
            for (int y = r0; y < r1; ++y) {
              for (int xx = c0; xx < c1; ++xx) {
                const std::size_t idx = base + std::size_t(y) * w + xx;
                if (x[idx] > best_v) {
                  best_v = x[idx];
                  best = idx;
                }
              }
            }
            r.out[o] = best_v;
            r.argmax[o] = static_cast<std::int64_t>(best);
          }
        }
      }
    }
  }
  return r;
}

template <typename T>
void route_backward(const BasicTensor<T>& dy,
                    std::span<const std::int64_t> argmax, BasicTensor<T>* dx) {
  require(dy.size() == argmax.size(), "pool backward: argmax size mismatch");
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    (*dx)[static_cast<std::size_t>(argmax[i])] += dy[i];
  }
}

namespace {

struct ChannelLayout {
  int n, c;
  std::size_t spatial;
  std::size_t count() const { return std::size_t(n) * spatial; }
};

template <typename T>
ChannelLayout channel_layout(const BasicTensor<T>& x) {
  require(x.rank() >= 2, "batch_norm: input needs a channel dimension");
  std::size_t spatial = 1;
  for (int i = 2; i < x.rank(); ++i) spatial *= std::size_t(x.dim(i));
  return {x.dim(0), x.dim(1), spatial};
}

template <typename T>
void require_channel_vector(const BasicTensor<T>& v, int c, const char* what) {
  require(v.size() == std::size_t(c),
          std::string("batch_norm: ") + what + " must have " +
              std::to_string(c) + " entries");
}

}  // namespace

template <typename T>
BasicTensor<T> batch_norm_train(const BasicTensor<T>& x,
                                const BasicTensor<T>& gamma,
                                const BasicTensor<T>& beta, T epsilon,
                                T momentum, BasicTensor<T>* running_mean,
                                BasicTensor<T>* running_var,
                                BatchNormCache<T>* cache) {
  const ChannelLayout L = channel_layout(x);
  require_channel_vector(gamma, L.c, "gamma");
  require_channel_vector(beta, L.c, "beta");
  if (L.count() < 2) {
    throw Error(
        "batch_norm: train mode needs at least two values per channel");
  }
  BasicTensor<T> out(x.shape());
  BatchNormCache<T> local;
  BatchNormCache<T>& cc = cache ? *cache : local;
  cc.normalized = BasicTensor<T>(x.shape());
  cc.inv_std.assign(L.c, T(0));
  const double m = static_cast<double>(L.count());
  for (int ch = 0; ch < L.c; ++ch) {
    double sum = 0;
    for (int s = 0; s < L.n; ++s) {
      const T* p = x.raw() + (std::size_t(s) * L.c + ch) * L.spatial;
      for (std::size_t i = 0; i < L.spatial; ++i) sum += p[i];
    }
    const double mean = sum / m;
    double sq = 0;
    for (int s = 0; s < L.n; ++s) {
      const T* p = x.raw() + (std::size_t(s) * L.c + ch) * L.spatial;
      for (std::size_t i = 0; i < L.spatial; ++i) {
        const double d = p[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / m;
    const T inv_std = static_cast<T>(1.0 / std::sqrt(var + epsilon));
    cc.inv_std[ch] = inv_std;
    const T g = gamma[ch], b = beta[ch], mu = static_cast<T>(mean);
    for (int s = 0; s < L.n; ++s) {
      const std::size_t off = (std::size_t(s) * L.c + ch) * L.spatial;
      for (std::size_t i = 0; i < L.spatial; ++i) {
        const T xh = (x[off + i] - mu) * inv_std;
        cc.normalized[off + i] = xh;
        out[off + i] = g * xh + b;
      }
    }
    if (running_mean && running_var) {
      (*running_mean)[ch] = momentum * (*running_mean)[ch] +
                            (T(1) - momentum) * static_cast<T>(mean);
      (*running_var)[ch] = momentum * (*running_var)[ch] +
                           (T(1) - momentum) * static_cast<T>(sq / (m - 1));
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> batch_norm_infer(const BasicTensor<T>& x,
                                const BasicTensor<T>& gamma,
                                const BasicTensor<T>& beta,
                                const BasicTensor<T>& running_mean,
                                const BasicTensor<T>& running_var, T epsilon) {
  const ChannelLayout L = channel_layout(x);
  require_channel_vector(gamma, L.c, "gamma");
  require_channel_vector(beta, L.c, "beta");
  require_channel_vector(running_mean, L.c, "running_mean");
  require_channel_vector(running_var, L.c, "running_var");
  BasicTensor<T> out(x.shape());
  for (int ch = 0; ch < L.c; ++ch) {
    const T scale = gamma[ch] / std::sqrt(running_var[ch] + epsilon);
    const T shift = beta[ch] - running_mean[ch] * scale;
    for (int s = 0; s < L.n; ++s) {
      const std::size_t off = (std::size_t(s) * L.c + ch) * L.spatial;
      for (std::size_t i = 0; i < L.spatial; ++i) {
        out[off + i] = x[off + i] * scale + shift;
      }
    }
  }
  return out;
}

template <typename T>
void batch_norm_backward(const BasicTensor<T>& dy,
                         const BatchNormCache<T>& cache,
                         const BasicTensor<T>& gamma, BasicTensor<T>* dx,
                         BasicTensor<T>* dgamma, BasicTensor<T>* dbeta) {
  require_same_shape(dy, cache.normalized, "batch_norm backward");
  const ChannelLayout L = channel_layout(dy);
  const double m = static_cast<double>(L.count());
  for (int ch = 0; ch < L.c; ++ch) {
    double sum_dy = 0, sum_dy_xh = 0;
    for (int s = 0; s < L.n; ++s) {
      const std::size_t off = (std::size_t(s) * L.c + ch) * L.spatial;
      for (std::size_t i = 0; i < L.spatial; ++i) {
        sum_dy += dy[off + i];
        sum_dy_xh += double(dy[off + i]) * cache.normalized[off + i];
      }
    }
    if (dgamma) (*dgamma)[ch] += static_cast<T>(sum_dy_xh);
    if (dbeta) (*dbeta)[ch] += static_cast<T>(sum_dy);
    if (!dx) continue;
    const double k = double(gamma[ch]) * cache.inv_std[ch] / m;
    const double mean_dy = sum_dy, mean_dy_xh = sum_dy_xh;
    for (int s = 0; s < L.n; ++s) {
      const std::size_t off = (std::size_t(s) * L.c + ch) * L.spatial;
      for (std::size_t i = 0; i < L.spatial; ++i) {
        (*dx)[off + i] += static_cast<T>(
            k * (m * dy[off + i] - mean_dy -
                 double(cache.normalized[off + i]) * mean_dy_xh));
      }
    }
  }
}

template <typename T>
BasicTensor<T> fully_connected_forward(const BasicTensor<T>& x,
                                       const BasicTensor<T>& weight) {
  require_rank(x, 2, "fully_connected input");
  require_rank(weight, 2, "fully_connected weight");
  require(x.dim(1) == weight.dim(1),
          "fully_connected: input has " + std::to_string(x.dim(1)) +
              " features, weight expects " + std::to_string(weight.dim(1)));
  BasicTensor<T> out({x.dim(0), weight.dim(0)});
  MapMat<T>(out.raw(), x.dim(0), weight.dim(0)).noalias() =
      CMapMat<T>(x.raw(), x.dim(0), x.dim(1)) *
      CMapMat<T>(weight.raw(), weight.dim(0), weight.dim(1)).transpose();
  return out;
}

template <typename T>
void fully_connected_backward(const BasicTensor<T>& x,
                              const BasicTensor<T>& weight,
                              const BasicTensor<T>& dy, BasicTensor<T>* dx,
                              BasicTensor<T>* dweight) {
  require(dy.shape() == Shape({x.dim(0), weight.dim(0)}),
          "fully_connected backward: dy shape " + shape_string(dy.shape()));
  CMapMat<T> g(dy.raw(), dy.dim(0), dy.dim(1));
  if (dx) {
    MapMat<T>(dx->raw(), x.dim(0), x.dim(1)).noalias() +=
        g * CMapMat<T>(weight.raw(), weight.dim(0), weight.dim(1));
  }
  if (dweight) {
    MapMat<T>(dweight->raw(), weight.dim(0), weight.dim(1)).noalias() +=
        g.transpose() * CMapMat<T>(x.raw(), x.dim(0), x.dim(1));
  }
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return out;
}

template <typename T>
void relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& dy,
                   BasicTensor<T>* dx) {
  require_same_shape(x, dy, "relu backward");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > T(0)) (*dx)[i] += dy[i];
  }
}

template <typename T>
BasicTensor<T> dropout_mask(const Shape& shape, double rate,
                            std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error("dropout: rate must be in [0, 1)");
  }
  BasicTensor<T> mask(shape, T(1));
  if (rate == 0.0) return mask;
  const double keep = 1.0 - rate;
  const T scale = static_cast<T>(1.0 / keep);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = uniform01(rng) < keep ? scale : T(0);
  }
  return mask;
}

template <typename T>
BasicTensor<T> sigmoid_forward(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<T>(sigmoid(x[i]));
  }
  return out;
}

template <typename T>
T softmax_cross_entropy(const BasicTensor<T>& logits,
                        std::span<const int> targets, BasicTensor<T>* grad) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const int n = logits.dim(0), v = logits.dim(1);
  require(targets.size() == std::size_t(n),
          "softmax_cross_entropy: one target per row required");
  if (grad) require_same_shape(*grad, logits, "softmax_cross_entropy grad");
  double total = 0;
  std::vector<double> row(v);
  for (int r = 0; r < n; ++r) {
    const int t = targets[r];
    if (t < 0 || t >= v) {
      throw Error("softmax_cross_entropy: target index " + std::to_string(t) +
                  " out of range [0, " + std::to_string(v) + ")");
    }
    const T* l = logits.raw() + std::size_t(r) * v;
    for (int j = 0; j < v; ++j) row[j] = l[j];
    const double lse = log_sum_exp(row);
    total += lse - row[t];
    if (grad) {
      T* g = grad->raw() + std::size_t(r) * v;
      for (int j = 0; j < v; ++j) {
        const double p = std::exp(row[j] - lse);
        g[j] += static_cast<T>(((j == t ? p - 1.0 : p)) / n);
      }
    }
  }
  return static_cast<T>(total / n);
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

#define YFTAG_INSTANTIATE_OPS(T)                                              \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&,               \
                                         const BasicTensor<T>&,               \
                                         const ConvParams&);                  \
  template void conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, \
                                const ConvParams&, const BasicTensor<T>&,     \
                                BasicTensor<T>*, BasicTensor<T>*);            \
  template Pooled<T> max_pool_forward(const BasicTensor<T>&, int, int);       \
  template Pooled<T> spp_forward(const BasicTensor<T>&, std::span<const int>); \
  template void route_backward(const BasicTensor<T>&,                         \
                               std::span<const std::int64_t>,                 \
                               BasicTensor<T>*);                              \
  template BasicTensor<T> batch_norm_train(                                   \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, T, \
      T, BasicTensor<T>*, BasicTensor<T>*, BatchNormCache<T>*);               \
  template BasicTensor<T> batch_norm_infer(                                   \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
      const BasicTensor<T>&, const BasicTensor<T>&, T);                       \
  template void batch_norm_backward(const BasicTensor<T>&,                    \
                                    const BatchNormCache<T>&,                 \
                                    const BasicTensor<T>&, BasicTensor<T>*,   \
                                    BasicTensor<T>*, BasicTensor<T>*);        \
  template BasicTensor<T> fully_connected_forward(const BasicTensor<T>&,      \
                                                  const BasicTensor<T>&);     \
  template void fully_connected_backward(                                     \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
      BasicTensor<T>*, BasicTensor<T>*);                                      \
  template BasicTensor<T> relu_forward(const BasicTensor<T>&);                \
  template void relu_backward(const BasicTensor<T>&, const BasicTensor<T>&,   \
                              BasicTensor<T>*);                               \
  template BasicTensor<T> dropout_mask<T>(const Shape&, double,               \
                                          std::mt19937_64&);                  \
  template BasicTensor<T> sigmoid_forward(const BasicTensor<T>&);             \
  template T softmax_cross_entropy(const BasicTensor<T>&,                     \
                                   std::span<const int>, BasicTensor<T>*);

YFTAG_INSTANTIATE_OPS(float)
YFTAG_INSTANTIATE_OPS(double)

#undef YFTAG_INSTANTIATE_OPS

}  // namespace yftag::ops
