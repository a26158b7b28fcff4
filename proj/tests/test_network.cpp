#include <cmath>

#include <gtest/gtest.h>

#include "poolattn/errors.hpp"
#include "poolattn/network.hpp"

using namespace poolattn;

TEST(Synth, Deterministic) {
  const auto a = synth_dataset(3, 4, 16);
  const auto b = synth_dataset(3, 4, 16);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_TRUE(a[i].image.identical(b[i].image));
    EXPECT_TRUE(a[i].labels.identical(b[i].labels));
  }
  EXPECT_FALSE(synth_dataset(4, 1, 16)[0].image.identical(a[0].image));
}

TEST(Synth, EmptyAndTooSmall) {
  EXPECT_TRUE(synth_dataset(1, 0, 16).empty());
  EXPECT_THROW(synth_dataset(1, 1, 4), ConfigError);
}

TEST(Synth, ObjectAreaWithinBounds) {
  for (const auto& s : synth_dataset(7, 100, 32)) {
    ASSERT_EQ(s.image.shape(), (Shape{3, 32, 32}));
    const double frac = sum(s.labels) / 1024.0;
    EXPECT_GE(frac, 0.10);
    EXPECT_LE(frac, 0.60);
    for (std::size_t i = 0; i < s.labels.numel(); ++i) EXPECT_TRUE(s.labels[i] == 0.0 || s.labels[i] == 1.0);
  }
}

TEST(Network, FreshGatesPassStemThroughBothBranches) {
  const auto model = TwoBranchNet::create(NetConfig{});
  EXPECT_EQ(model.spa.lambda, 0.0);
  EXPECT_EQ(model.cpa.mu, 0.0);
  const auto image = synth_dataset(1, 1, 16)[0].image;
  const auto a = forward_activations(model, image);
  EXPECT_TRUE(a.spa_out.identical(a.stem));
  EXPECT_TRUE(a.cpa_out.identical(a.stem));
  const auto expected = conv1x1(concat_channels(a.stem, a.stem), model.fuse);
  EXPECT_TRUE(a.logits.identical(expected));
}

TEST(Network, ShapeAndDeterminism) {
  NetConfig cfg;
  const auto m1 = TwoBranchNet::create(cfg);
  const auto m2 = TwoBranchNet::create(cfg);
  Rng rng(2);
  const auto image = random_uniform<double>(Shape{3, 12, 10}, rng, 1.0);
  const auto y = forward(m1, image);
  EXPECT_EQ(y.shape(), (Shape{2, 12, 10}));
  EXPECT_TRUE(y.identical(forward(m2, image)));
  EXPECT_EQ(m1.channels(), 16u);
}

TEST(Network, ParameterListRoundTrip) {
  auto model = TwoBranchNet::create(NetConfig{});
  const auto names = parameter_names(model);
  auto params = parameters(model);
  ASSERT_EQ(names.size(), params.size());
  std::size_t total = 0;
  for (const auto& p : params) total += p.numel();
  EXPECT_EQ(total, model.param_count());
  params.pop_back();
  EXPECT_THROW(assign_parameters(model, params), DimensionError);
}

TEST(Network, BadChannelsRejected) {
  NetConfig cfg;
  cfg.channels = 0;
  EXPECT_THROW(TwoBranchNet::create(cfg), ConfigError);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  auto model = TwoBranchNet::create(NetConfig{});
  const auto before = parameters(model);
  const auto data = synth_dataset(7, 4, 16);
  TrainConfig tc;
  tc.lr = 0.0;
  tc.steps = 1;
  const auto untrained = evaluate(model, data).pixel_accuracy;
  const auto report = train(model, data, tc);
  const auto after = parameters(model);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_TRUE(before[i].identical(after[i]));
  EXPECT_EQ(report.initial_accuracy, untrained);
  EXPECT_EQ(evaluate(model, data).pixel_accuracy, untrained);
}

// A fresh model predicts nearly one class everywhere, so a single draw lands
// anywhere in the object-fraction range; the band holds for the mean.
TEST(Train, UntrainedAccuracyNearChance) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    NetConfig cfg;
    cfg.seed = seed;
    const auto model = TwoBranchNet::create(cfg);
    total += evaluate(model, synth_dataset(seed + 100, 16, 16)).pixel_accuracy;
  }
  EXPECT_GE(total / 8.0, 0.3);
  EXPECT_LE(total / 8.0, 0.7);
}

TEST(Train, InvalidConfigurations) {
  auto model = TwoBranchNet::create(NetConfig{});
  const auto data = synth_dataset(7, 2, 16);
  TrainConfig tc;
  tc.steps = 0;
  EXPECT_THROW(train(model, data, tc), ConfigError);
  tc = {};
  tc.momentum = 1.0;
  EXPECT_THROW(train(model, data, tc), ConfigError);
  tc = {};
  tc.lr = -1.0;
  EXPECT_THROW(train(model, data, tc), ConfigError);
  tc = {};
  tc.batch = 0;
  EXPECT_THROW(train(model, data, tc), ConfigError);
  tc = {};
  tc.image_size = 4;
  EXPECT_THROW(train(model, data, tc), ConfigError);
  tc = {};
  EXPECT_THROW(train(model, {}, tc), ConfigError);
  tc.image_size = 12;
  EXPECT_THROW(train(model, data, tc), ConfigError);
}

TEST(Train, DivergenceReportsStep) {
  auto model = TwoBranchNet::create(NetConfig{});
  const auto data = synth_dataset(7, 4, 16);
  TrainConfig tc;
  // Weights of order 1e300 overflow on the next forward.
  tc.lr = 1e300;
  tc.momentum = 0.0;
  tc.steps = 50;
  try {
    train(model, data, tc);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 1u);
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
  }
}

TEST(PolyLr, Endpoints) {
  EXPECT_EQ(poly_lr(0.05, 0, 300, 0.9), 0.05);
  EXPECT_EQ(poly_lr(0.05, 300, 300, 0.9), 0.0);
  EXPECT_NEAR(poly_lr(1.0, 150, 300, 0.9), std::pow(0.5, 0.9), 1e-15);
  EXPECT_LT(poly_lr(1.0, 200, 300, 0.9), poly_lr(1.0, 100, 300, 0.9));
}

// The pinned demonstration run: seed 7, 16x16, 300 steps, 40 training images.
class PinnedRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    model_ = new TwoBranchNet(TwoBranchNet::create(NetConfig{}));
    const auto data = synth_dataset(7, 40, 16);
    report_ = new TrainedReport(train(*model_, data, TrainConfig{}));
  }
  static void TearDownTestSuite() {
    delete model_;
    delete report_;
  }
  static TwoBranchNet* model_;
  static TrainedReport* report_;
};

TwoBranchNet* PinnedRun::model_ = nullptr;
TrainedReport* PinnedRun::report_ = nullptr;

TEST_F(PinnedRun, ReachesTargetAccuracyWithOpenGates) {
  EXPECT_GE(report_->pixel_accuracy, 0.95);
  EXPECT_GT(std::abs(report_->lambda_final), 0.0);
  EXPECT_GT(std::abs(report_->mu_final), 0.0);
  EXPECT_EQ(report_->lambda_final, model_->spa.lambda);
  EXPECT_EQ(report_->mu_final, model_->cpa.mu);
}

TEST_F(PinnedRun, MatchesRecordedBaseline) {
  EXPECT_NEAR(report_->final_loss, 0.0002940178318406617, 1e-12);
  EXPECT_EQ(report_->pixel_accuracy, 1.0);
  EXPECT_EQ(report_->initial_accuracy, 0.51435546875);
  EXPECT_NEAR(report_->lambda_final, -0.410298868553497, 1e-12);
  EXPECT_NEAR(report_->mu_final, -0.10994459898463338, 1e-12);
  EXPECT_NEAR(evaluate(*model_, synth_dataset(8, 32, 16)).pixel_accuracy, 0.9998779296875, 1e-12);
}

TEST_F(PinnedRun, LossDecreasesOverTenStepWindows) {
  const auto& curve = report_->loss_curve;
  ASSERT_EQ(curve.size(), 300u);
  double previous = INFINITY;
  for (std::size_t w = 0; w < 30; ++w) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 10; ++i) mean += curve[w * 10 + i] / 10.0;
    EXPECT_LE(mean, previous) << "window " << w;
    previous = mean;
  }
  EXPECT_EQ(report_->lambda_curve.size(), 300u);
  EXPECT_EQ(report_->mu_curve.size(), 300u);
}
