#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "yftag/arch.hpp"
#include "yftag/checkpoint.hpp"
#include "yftag/complexity.hpp"
#include "yftag/error.hpp"
#include "yftag/network.hpp"
#include "yftag/shapes.hpp"
#include "yftag/train.hpp"

using namespace yftag;
namespace fs = std::filesystem;

namespace {

HeadConfig tiny_head(int classes) {
  HeadConfig h;
  h.hidden_fc_widths = {8};
  h.num_classes = classes;
  return h;
}

arch::LayerPlan tiny_plan(int classes = data::kShapeClasses) {
  return arch::expand_layers(
      arch::parse_arch("tiny", "(3,4)/2+2/2; (1x3+3x1,6)"), {24, 24, 3},
      tiny_head(classes));
}

data::Dataset tiny_shapes(int count, std::uint64_t seed) {
  data::ShapesConfig c;
  c.count = count;
  c.size = 32;
  c.seed = seed;
  c.min_radius = 4;
  c.max_radius = 6;
  return data::generate_shapes(c);
}

net::TrainConfig tiny_config() {
  net::TrainConfig c;
  c.batch_size = 8;
  c.base_lr = 0.01;
  c.total_epochs = 2;
  c.seed = 4;
  return c;
}

train::AugmentConfig tiny_augment() { return {28, 24}; }

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("yftag_net_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<Tensor> values(const net::Network& n) {
  std::vector<Tensor> out;
  for (const auto& p : n.parameters()) out.push_back(p.value);
  return out;
}

}  // namespace

TEST(Schedule, StepDecay) {
  net::TrainConfig c;
  c.base_lr = 0.01;
  c.lr_decay_factor = 10;
  c.lr_decay_every = 20;
  EXPECT_DOUBLE_EQ(net::lr_at(c, 0), 0.01);
  EXPECT_DOUBLE_EQ(net::lr_at(c, 19), 0.01);
  EXPECT_DOUBLE_EQ(net::lr_at(c, 20), 0.001);
  EXPECT_DOUBLE_EQ(net::lr_at(c, 45), 0.0001);
}

TEST(Schedule, InvalidConfigRejected) {
  auto c = tiny_config();
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
  c = tiny_config();
  c.base_lr = -1;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Sgd, MomentumAndDecay) {
  Parameter p("w", Tensor({1}, 2.0f), true);
  p.zero_grad();
  p.grad[0] = 1.0f;
  net::sgd_update(p, 0.1, 0.9, 0.01);
  // v = 1 + 0.01*2 = 1.02; w = 2 - 0.102
  EXPECT_NEAR(p.value[0], 1.898f, 1e-6);
  p.grad[0] = 0.0f;
  net::sgd_update(p, 0.1, 0.9, 0.0);
  EXPECT_NEAR(p.value[0], 1.898f - 0.1f * 0.918f, 1e-6);
}

TEST(Sgd, NoDecayForAffineTerms) {
  Parameter p("beta", Tensor({1}, 5.0f), false);
  p.zero_grad();
  net::sgd_update(p, 0.1, 0.9, 0.5);
  EXPECT_EQ(p.value[0], 5.0f);
}

TEST(Network, ParameterCountMatchesAnalyzer) {
  auto plan = tiny_plan();
  net::Network n(plan, 1);
  EXPECT_EQ(n.parameter_count(), complexity::count_complexity(plan).total_params);
}

TEST(Network, HeNormalInitialization) {
  HeadConfig h = tiny_head(4);
  auto plan = arch::expand_layers(arch::parse_arch("t", "(3,64)"), {10, 10, 32}, h);
  net::Network n(plan, 7);
  const auto& w = n.parameters().front().value;
  double ss = 0;
  for (float v : w.data()) ss += double(v) * v;
  const double fan_in = 3 * 3 * 32;
  EXPECT_NEAR(ss / w.size(), 2.0 / fan_in, 0.1 * 2.0 / fan_in);
}

TEST(Network, SameSeedSameWeights) {
  net::Network a(tiny_plan(), 3), b(tiny_plan(), 3), c(tiny_plan(), 4);
  EXPECT_EQ(values(a), values(b));
  EXPECT_NE(values(a), values(c));
}

TEST(Network, ForwardShapesAndWrongInput) {
  net::Network n(tiny_plan(), 1);
  auto logits = n.predict(Tensor({2, 3, 24, 24}, 0.1f));
  EXPECT_EQ(logits.shape(), (Shape{2, data::kShapeClasses}));
  EXPECT_THROW(n.predict(Tensor({2, 3, 20, 24})), ShapeError);
}

TEST(Network, BuildChecksHead) {
  auto plan = tiny_plan();
  EXPECT_THROW(net::build_network(plan, tiny_head(3), 1), Error);
  EXPECT_NO_THROW(net::build_network(plan, tiny_head(data::kShapeClasses), 1));
}

TEST(Augment, TenViewsAreDistinctCrops) {
  Tensor img({1, 6, 6});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = float(i);
  EXPECT_EQ(net::crop_view(img, 4, 0)[0], 7.0f);   // center starts at (1,1)
  EXPECT_EQ(net::crop_view(img, 4, 1)[0], 0.0f);   // top-left
  EXPECT_EQ(net::crop_view(img, 4, 2)[0], 2.0f);   // top-right
  EXPECT_EQ(net::crop_view(img, 4, 3)[0], 12.0f);  // bottom-left
  EXPECT_EQ(net::crop_view(img, 4, 4)[0], 14.0f);  // bottom-right
  EXPECT_EQ(net::crop_view(img, 4, 5)[0], 10.0f);  // mirrored center
  std::mt19937_64 rng(1);
  std::vector<int> seen(net::kNumViews, 0);
  for (int i = 0; i < 2000; ++i) {
    int v = -1;
    net::augment(img, net::Mode::train, 4, rng, &v);
    ++seen.at(v);
  }
  for (int c : seen) EXPECT_GT(c, 120);
  int v = -1;
  net::augment(img, net::Mode::infer, 4, rng, &v);
  EXPECT_EQ(v, 0);
}

TEST(Train, EpochOrderIsAPermutationKeyedOnEpoch) {
  auto a = train::epoch_order(50, 9, 0), b = train::epoch_order(50, 9, 0);
  auto c = train::epoch_order(50, 9, 1);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  std::sort(c.begin(), c.end());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c[i], i);
}

TEST(Train, DeterministicAcrossRuns) {
  auto data = tiny_shapes(40, 2);
  net::Network a(tiny_plan(), 1), b(tiny_plan(), 1);
  train::Trainer ta(a, tiny_config(), tiny_augment());
  train::Trainer tb(b, tiny_config(), tiny_augment());
  auto ma = ta.run(data), mb = tb.run(data);
  ASSERT_EQ(ma.size(), 2u);
  EXPECT_EQ(ma[1].train_loss, mb[1].train_loss);
  EXPECT_EQ(values(a), values(b));
}

TEST(Train, SkipsExamplesWithoutPositives) {
  auto data = tiny_shapes(16, 3);
  for (std::size_t i = 0; i < 6; ++i) data.examples[i].positives.clear();
  net::Network n(tiny_plan(), 1);
  train::Trainer t(n, tiny_config(), tiny_augment());
  auto m = t.run_epoch(data);
  EXPECT_EQ(m.skipped, 6);
  EXPECT_EQ(m.examples, 10);
}

TEST(Train, LossDecreasesOnSmallCorpus) {
  auto data = tiny_shapes(200, 6);
  net::Network n(tiny_plan(), 1);
  auto c = tiny_config();
  c.total_epochs = 8;
  c.base_lr = 0.02;
  train::Trainer t(n, c, tiny_augment());
  auto m = t.run(data);
  EXPECT_LT(m.back().train_loss, m.front().train_loss);
}

TEST(Checkpoint, RoundTripAndResumeMatchesUninterrupted) {
  auto dir = scratch("resume");
  auto data = tiny_shapes(24, 8);
  auto c = tiny_config();
  c.total_epochs = 3;

  net::Network full(tiny_plan(), 1);
  train::Trainer tf(full, c, tiny_augment());
  tf.run(data);

  net::Network part(tiny_plan(), 1);
  train::Trainer tp(part, c, tiny_augment());
  train::TrainOptions opt;
  opt.checkpoint_dir = dir.string();
  tp.run_epoch(data, opt);
  auto loaded = ckpt::load((dir / "last.ckpt").string());
  EXPECT_EQ(loaded.state.epoch, 1);
  EXPECT_EQ(values(loaded.network), values(part));
  train::Trainer tr(loaded.network, loaded.state.config, loaded.state.augment);
  tr.restore(loaded.state.epoch, loaded.state.rng_state);
  tr.run(data);
  EXPECT_EQ(values(loaded.network), values(full));
  fs::remove_all(dir);
}

TEST(Checkpoint, CorruptFileRejected) {
  auto dir = scratch("corrupt");
  const auto path = (dir / "bad.ckpt").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint";
  }
  EXPECT_THROW(ckpt::load(path), Error);
  fs::remove_all(dir);
}

TEST(Shapes, DeterministicAndLabelled) {
  auto a = tiny_shapes(20, 5), b = tiny_shapes(20, 5);
  ASSERT_EQ(a.examples.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(a.examples[i].image, b.examples[i].image);
    EXPECT_EQ(a.examples[i].positives, b.examples[i].positives);
    EXPECT_GE(a.examples[i].positives.size(), 1u);
    EXPECT_LE(a.examples[i].positives.size(), 3u);
  }
  data::ShapesConfig bad;
  bad.size = 16;
  EXPECT_THROW(data::generate_shapes(bad), Error);
}
