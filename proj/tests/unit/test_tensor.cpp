#include <gtest/gtest.h>

#include <random>

#include "yftag/autograd.hpp"
#include "yftag/error.hpp"
#include "yftag/gradcheck.hpp"
#include "yftag/ops.hpp"
#include "yftag/tensor.hpp"

using namespace yftag;

namespace {

TensorD random_tensor(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  TensorD t(std::move(shape));
  for (auto& v : t.data()) v = normal(rng);
  return t;
}

// Direct nested-loop convolution with zero padding.
TensorD naive_conv(const TensorD& x, const TensorD& k, const ops::ConvParams& p) {
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const int oh = p.out_h(h, kh), ow = p.out_w(w, kw);
  TensorD y({n, co, oh, ow});
  for (int b = 0; b < n; ++b)
    for (int o = 0; o < co; ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double s = 0;
          for (int c = 0; c < ci; ++c)
            for (int u = 0; u < kh; ++u)
              for (int v = 0; v < kw; ++v) {
                const int r = i * p.stride + u - p.pad_top;
                const int q = j * p.stride + v - p.pad_left;
                if (r < 0 || r >= h || q < 0 || q >= w) continue;
                s += x[((std::size_t(b) * ci + c) * h + r) * w + q] *
                     k[((std::size_t(o) * ci + c) * kh + u) * kw + v];
              }
          y[((std::size_t(b) * co + o) * oh + i) * ow + j] = s;
        }
  return y;
}

}  // namespace

TEST(Tensor, ShapeAndReshape) {
  TensorD t({2, 3, 4}, 1.5);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3);
  auto r = t.reshaped({6, 4});
  EXPECT_EQ(r.dim(0), 6);
  EXPECT_THROW(t.reshaped({5, 5}), ShapeError);
  EXPECT_THROW(TensorD({2, 2}, std::vector<double>(3)), ShapeError);
}

TEST(Tensor, FiniteCheck) {
  TensorD t({2}, 0.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(t.check_finite("test"), NumericError);
}

TEST(Ops, ConvMatchesNaiveLoops) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 3 + int(rng() % 8), w = 3 + int(rng() % 8);
    const int kh = 1 + int(rng() % 3), kw = 1 + int(rng() % 3);
    const int stride = 1 + int(rng() % 2);
    auto x = random_tensor({2, 3, h, w}, rng);
    auto k = random_tensor({4, 3, kh, kw}, rng);
    auto p = trial % 2 ? ops::ConvParams::same(h, w, kh, kw, stride)
                       : ops::ConvParams::valid(stride);
    auto y = ops::conv2d_forward(x, k, p);
    auto want = naive_conv(x, k, p);
    ASSERT_EQ(y.shape(), want.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
      ASSERT_NEAR(y[i], want[i], 1e-10);
    }
  }
}

TEST(Ops, SamePaddingIsCeilAndPadsAfter) {
  auto p = ops::ConvParams::same(36, 36, 2, 2, 1);
  EXPECT_EQ(p.pad_top, 0);
  EXPECT_EQ(p.pad_bottom, 1);
  EXPECT_EQ(p.out_h(36, 2), 36);
  auto q = ops::ConvParams::same(7, 7, 3, 3, 2);
  EXPECT_EQ(q.out_h(7, 3), 4);
}

TEST(Ops, MaxPoolTiesPickFirst) {
  TensorD x({1, 1, 2, 2}, 1.0);
  auto pooled = ops::max_pool_forward(x, 2, 2);
  ASSERT_EQ(pooled.argmax.size(), 1u);
  EXPECT_EQ(pooled.argmax[0], 0);
}

TEST(Ops, SppBinsCoverEverySize) {
  std::mt19937_64 rng(5);
  const std::vector<int> levels{6, 3, 2, 1};
  for (int size : {6, 7, 9, 13, 18}) {
    auto x = random_tensor({1, 2, size, size}, rng);
    auto pooled = ops::spp_forward(x, std::span<const int>(levels));
    EXPECT_EQ(pooled.out.dim(1), 2 * 50);
    // Level 1 is the global maximum per channel.
    for (int c = 0; c < 2; ++c) {
      double m = -1e300;
      for (int i = 0; i < size * size; ++i) m = std::max(m, x[c * size * size + i]);
      EXPECT_EQ(pooled.out[(36 + 9 + 4) * 2 + c], m);
    }
  }
}

TEST(Ops, SoftmaxCrossEntropyIsStable) {
  TensorD logits({1, 3}, std::vector<double>{1000.0, 0.0, -1000.0});
  std::vector<int> target{0};
  EXPECT_NEAR(ops::softmax_cross_entropy(logits, std::span<const int>(target),
                                         static_cast<TensorD*>(nullptr)),
              0.0, 1e-12);
  target[0] = 1;
  EXPECT_NEAR(ops::softmax_cross_entropy(logits, std::span<const int>(target),
                                         static_cast<TensorD*>(nullptr)),
              1000.0, 1e-9);
}

TEST(Ops, DropoutMaskScales) {
  std::mt19937_64 rng(9);
  auto mask = ops::dropout_mask<double>({10000}, 0.2, rng);
  double sum = 0;
  for (double v : mask.data()) {
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.25) < 1e-12);
    sum += v;
  }
  EXPECT_NEAR(sum / 10000, 1.0, 0.03);
  auto ones = ops::dropout_mask<double>({5}, 0.0, rng);
  for (double v : ones.data()) EXPECT_EQ(v, 1.0);
}

TEST(Ops, BatchNormRunningStatistics) {
  TensorD x({4, 1}, std::vector<double>{1, 2, 3, 4});
  TensorD gamma({1}, 1.0), beta({1}, 0.0), mean({1}, 0.0), var({1}, 1.0);
  ops::BatchNormCache<double> cache;
  auto y = ops::batch_norm_train(x, gamma, beta, 1e-5, 0.9, &mean, &var, &cache);
  EXPECT_NEAR(mean[0], 0.1 * 2.5, 1e-12);
  EXPECT_NEAR(var[0], 0.9 + 0.1 * (5.0 / 3.0), 1e-12);
  double s = 0;
  for (double v : y.data()) s += v;
  EXPECT_NEAR(s, 0.0, 1e-12);
}

TEST(Autograd, SharedInputAccumulates) {
  ag::Tape<double> tape;
  auto x = tape.variable(TensorD({3}, std::vector<double>{1, -2, 3}));
  auto a = ag::weighted_sum(tape, x, TensorD({3}, 2.0));
  auto b = ag::weighted_sum(tape, x, TensorD({3}, 5.0));
  (void)a;
  tape.backward(b);
  for (double g : tape.grad(x).data()) EXPECT_EQ(g, 5.0);
}

TEST(Autograd, BackwardNeedsScalar) {
  ag::Tape<double> tape;
  auto x = tape.variable(TensorD({2}, 1.0));
  auto y = ag::relu(tape, x);
  EXPECT_THROW(tape.backward(y), ShapeError);
}

TEST(Autograd, ParameterGradientLandsInParameter) {
  ParameterD p("w", TensorD({2, 3}, 0.5), true);
  ag::Tape<double> tape;
  auto x = tape.constant(TensorD({1, 3}, std::vector<double>{1, 2, 3}));
  auto w = tape.parameter(p);
  auto y = ag::fully_connected(tape, x, w);
  tape.backward(ag::weighted_sum(tape, y, TensorD({1, 2}, 1.0)));
  ASSERT_EQ(p.grad.size(), 6u);
  EXPECT_EQ(p.grad[0], 1.0);
  EXPECT_EQ(p.grad[5], 3.0);
}

TEST(Autograd, NonFiniteOutputThrows) {
  ag::Tape<double> tape;
  auto x = tape.variable(
      TensorD({1}, std::numeric_limits<double>::infinity()));
  EXPECT_THROW(ag::relu(tape, x), NumericError);
}

TEST(GradCheck, ConvAndFcPass) {
  std::mt19937_64 rng(11);
  auto conv = [](ag::Tape<double>& t, std::span<const ag::Var> in) {
    auto y = ag::conv2d(t, in[0], in[1], ops::ConvParams::same(5, 6, 3, 2, 2));
    return ag::weighted_sum(t, y, TensorD(t.value(y).shape(), 0.3));
  };
  auto r = gradient_check(conv,
                          {random_tensor({2, 2, 5, 6}, rng),
                           random_tensor({3, 2, 3, 2}, rng)},
                          1e-5);
  EXPECT_TRUE(r.passed) << r.worst;
  EXPECT_GT(r.checked, 0u);

  auto fc = [](ag::Tape<double>& t, std::span<const ag::Var> in) {
    auto y = ag::fully_connected(t, in[0], in[1]);
    return ag::softmax_cross_entropy(t, y, {1, 0, 2});
  };
  r = gradient_check(fc, {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)},
                     1e-5);
  EXPECT_TRUE(r.passed) << r.worst;
}

TEST(GradCheck, DetectsAWrongGradient) {
  // A closure whose recorded backward is deliberately off by a factor.
  auto bad = [](ag::Tape<double>& t, std::span<const ag::Var> in) {
    const TensorD& xv = t.value(in[0]);
    TensorD y({1}, 0.0);
    for (double v : xv.data()) y[0] += v * v;
    const ag::Var x = in[0];
    return t.record(std::move(y), true,
                    [x](ag::Tape<double>& tape, const TensorD& g) {
                      auto* gx = tape.grad_buffer(x);
                      const TensorD& v = tape.value(x);
                      for (std::size_t i = 0; i < v.size(); ++i) {
                        (*gx)[i] += g[0] * 3.0 * v[i];
                      }
                    },
                    "bad");
  };
  std::mt19937_64 rng(2);
  auto r = gradient_check(bad, {random_tensor({4}, rng)}, 1e-5);
  EXPECT_FALSE(r.passed);
  EXPECT_NEAR(r.max_relative_error, 1.0 / 3.0, 1e-4);
}
