#include <gtest/gtest.h>

#include <limits>

#include "homnet/error.hpp"
#include "homnet/hierarchy.hpp"
#include "homnet/rng.hpp"
#include "homnet/train.hpp"

using namespace homnet;

namespace {

Dataset linear_task(int n, std::uint64_t seed, double noise = 0.0) {
  Rng rng(seed);
  Dataset d;
  d.features.resize(n, 3);
  d.target.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) d.features(i, j) = rng.normal();
    d.target(i) = 0.5 * d.features(i, 0) - 0.8 * d.features(i, 1) + 0.3 * d.features(i, 2) + noise * rng.normal();
  }
  d.feature_names = {"a", "b", "c"};
  return d;
}

}  // namespace

TEST(Adam, FirstStepMagnitude) {
  TrainConfig cfg;
  std::vector<double> params = {0.0};
  AdamState state;
  adam_step(params, std::vector<double>{1.0}, state, cfg);
  EXPECT_NEAR(params[0], -1e-3 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  TrainConfig cfg;
  std::vector<double> params = {0.3, -2.0, 5.0};
  const auto before = params;
  AdamState state;
  for (int i = 0; i < 5; ++i) adam_step(params, std::vector<double>(3, 0.0), state, cfg);
  EXPECT_EQ(params, before);
}

TEST(Adam, NonFiniteGradientAborts) {
  TrainConfig cfg;
  std::vector<double> params = {0.0, 0.0};
  AdamState state;
  EXPECT_THROW(adam_step(params, std::vector<double>{1.0, std::nan("")}, state, cfg), RuntimeFailure);
}

TEST(Adam, Deterministic) {
  TrainConfig cfg;
  std::vector<double> a = {1.0, 2.0}, b = a;
  AdamState sa, sb;
  for (int i = 0; i < 10; ++i) {
    const std::vector<double> g = {std::sin(i), std::cos(i)};
    adam_step(a, g, sa, cfg);
    adam_step(b, g, sb, cfg);
  }
  EXPECT_EQ(a, b);
}

TEST(Fit, LinearTargetIsLearned) {
  const Dataset train = linear_task(256, 1), val = linear_task(64, 2);
  Network net = build_mlp(3, {8});
  init_params(net, 3);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 64;
  cfg.max_epochs = 3000;
  cfg.patience = 3000;
  cfg.min_delta = 0.0;
  const auto result = fit(net, train, val, cfg);
  EXPECT_LT(result.history[static_cast<std::size_t>(result.best_epoch - 1)].train_mse, 1e-4);
}

TEST(Fit, ForcedStopAfterTwoEpochs) {
  const Dataset train = linear_task(50, 1), val = linear_task(20, 2);
  Network net = build_mlp(3, {4});
  init_params(net, 1);
  TrainConfig cfg;
  cfg.patience = 1;
  cfg.min_delta = std::numeric_limits<double>::infinity();
  const auto result = fit(net, train, val, cfg);
  EXPECT_EQ(result.stopped_epoch, 2);
  EXPECT_EQ(result.history.size(), 2u);
}

TEST(Fit, RunsToMaxEpochsWhileImproving) {
  const Dataset train = linear_task(200, 4), val = linear_task(50, 5);
  Network net = build_mlp(3, {16});
  init_params(net, 2);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 200;
  cfg.max_epochs = 30;
  cfg.patience = 1;
  cfg.min_delta = 0.0;
  const auto result = fit(net, train, val, cfg);
  EXPECT_EQ(result.stopped_epoch, 30);
  for (std::size_t e = 1; e < result.history.size(); ++e)
    EXPECT_LT(result.history[e].val_mse, result.history[e - 1].val_mse);
}

TEST(Fit, RestoresBestParameters) {
  const Dataset train = linear_task(64, 6, 1.0), val = linear_task(16, 7, 1.0);
  Network net = build_hnn(from_cliques({{0, 1, 2}}, 3));
  init_params(net, 5);
  TrainConfig cfg;
  cfg.learning_rate = 5e-2;
  cfg.batch_size = 8;
  cfg.max_epochs = 200;
  cfg.patience = 20;
  const auto result = fit(net, train, val, cfg);
  EXPECT_LE(result.stopped_epoch, cfg.max_epochs);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& h : result.history) best = std::min(best, h.val_mse);
  EXPECT_EQ(result.best_val_mse, best);
  EXPECT_EQ(net.params, result.best_params);
  ForwardCache cache;
  Vector pred = forward(net, val.features, cache);
  EXPECT_NEAR(mse(pred, val.target), best, 1e-12);
}

TEST(Fit, Reproducible) {
  const Dataset train = linear_task(100, 8, 0.3), val = linear_task(30, 9, 0.3);
  auto run = [&] {
    Network net = build_mlp(3, {6, 6});
    init_params(net, 4);
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.max_epochs = 25;
    cfg.patience = 25;
    cfg.seed = 42;
    return fit(net, train, val, cfg);
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.best_params, b.best_params);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) EXPECT_EQ(a.history[e].val_mse, b.history[e].val_mse);
}

TEST(Fit, ConfigValidation) {
  TrainConfig cfg;
  cfg.patience = cfg.max_epochs + 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Fit, DivergenceIsReported) {
  Dataset train = linear_task(32, 1), val = linear_task(8, 2);
  train.target *= 1e200;
  Network net = build_mlp(3, {4});
  init_params(net, 1);
  TrainConfig cfg;
  cfg.max_epochs = 5;
  cfg.patience = 5;
  EXPECT_THROW(fit(net, train, val, cfg), RuntimeFailure);
}
