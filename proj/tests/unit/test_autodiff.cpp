#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "ltof/autodiff/adam.hpp"
#include "ltof/autodiff/mlp.hpp"
#include "ltof/autodiff/tape.hpp"
#include "gradcheck.hpp"

using ltof::ShapeError;
using ltof::Tensor;
using namespace ltof::ad;

using ltof::testing::Builder;
using ltof::testing::fd_error;
using ltof::testing::op_cases;
using ltof::testing::random_tensor;

TEST(Tape, EveryOpMatchesFiniteDifferencesOver100Draws) {
  for (const auto& c : op_cases()) {
    std::mt19937_64 rng(42);
    double worst = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
      const Builder build = c.make(rng);
      worst = std::max(worst, fd_error(build, random_tensor(5, 3, rng, c.lo, c.hi)));
    }
    EXPECT_LT(worst, 1e-6) << c.name;
  }
}

TEST(Tape, GradientsOfParametersThroughMlp) {
  MlpConfig cfg{{3, 8, 8, 2}, 0.0, true};
  MlpModel model = MlpModel::init(cfg, 5);
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor(6, 3, rng);
  auto loss_of = [&](const MlpModel& m) {
    Tape t;
    auto bound = m.bind(t);
    MlpModel copy = m;
    return t.value(t.sum(t.square(copy.forward(t, bound, t.constant(x), Mode::kTraining, nullptr))))[0];
  };
  Tape t;
  auto bound = model.bind(t);
  MlpModel copy = model;
  const NodeId loss = t.sum(t.square(copy.forward(t, bound, t.constant(x), Mode::kTraining, nullptr)));
  const auto grads = t.backward(loss);
  double worst = 0.0;
  for (std::size_t p = 0; p < model.parameters().size(); ++p) {
    const Tensor g = grads.get_or_zero(bound[p], model.parameters()[p]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      MlpModel plus = model, minus = model;
      plus.parameters()[p][i] += 1e-6;
      minus.parameters()[p][i] -= 1e-6;
      const double fd = (loss_of(plus) - loss_of(minus)) / 2e-6;
      worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(fd)));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Tape, ShapeMismatchThrows) {
  Tape t;
  const NodeId a = t.constant(Tensor::matrix(2, 3));
  const NodeId b = t.constant(Tensor::matrix(3, 2));
  EXPECT_THROW(t.add(a, b), ShapeError);
  EXPECT_THROW(t.mul(a, b), ShapeError);
  EXPECT_THROW(t.matmul(a, a), ShapeError);
  EXPECT_THROW(t.add_row(a, t.constant(Tensor::matrix(1, 2))), ShapeError);
  EXPECT_THROW(t.backward(a), ShapeError);
}

TEST(Tape, ConstantsReceiveNoGradient) {
  Tape t;
  const NodeId c = t.constant(Tensor::scalar(2.0));
  const NodeId x = t.input(Tensor::scalar(3.0), true);
  const auto g = t.backward(t.mul(c, x));
  EXPECT_EQ(g.find(c), nullptr);
  EXPECT_DOUBLE_EQ(g[x][0], 2.0);
}

TEST(Mlp, InitWithinFanInBounds) {
  MlpModel m = MlpModel::init({{100, 40, 1}}, 3);
  const Tensor& w0 = m.parameters()[0];
  double max_abs = 0.0;
  for (double v : w0.data()) max_abs = std::max(max_abs, std::abs(v));
  EXPECT_LE(max_abs, 0.1);
  EXPECT_GT(max_abs, 0.09);
  const Tensor& w1 = m.parameters()[2];
  for (double v : w1.data()) EXPECT_LE(std::abs(v), 1.0 / std::sqrt(40.0));
}

TEST(Mlp, InitIsDeterministicInSeed) {
  MlpConfig cfg{{4, 16, 2}, 0.1, true};
  EXPECT_TRUE(MlpModel::init(cfg, 9) == MlpModel::init(cfg, 9));
  EXPECT_FALSE(MlpModel::init(cfg, 9) == MlpModel::init(cfg, 10));
}

TEST(Mlp, CheckpointRoundTripIsBitExact) {
  MlpConfig cfg{{4, 16, 16, 2}, 0.1, true};
  MlpModel m = MlpModel::init(cfg, 11);
  m.running_means()[0][3] = 0.125;
  const auto path = (std::filesystem::temp_directory_path() / "ltof_ckpt_test.json").string();
  save_checkpoint(m, path);
  const MlpModel back = load_checkpoint(path);
  EXPECT_TRUE(m == back);
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor(7, 4, rng);
  EXPECT_EQ(m.predict(x), back.predict(x));
  std::filesystem::remove(path);
}

TEST(Mlp, InferenceMatchesTapeForwardInInferenceMode) {
  MlpModel m = MlpModel::init({{3, 10, 2}, 0.3, true}, 4);
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor(5, 3, rng);
  Tape t;
  auto bound = m.bind(t, false);
  const NodeId out = m.forward(t, bound, t.constant(x), Mode::kInference, nullptr);
  const Tensor a = t.value(out), b = m.predict(x);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Adam, NonFiniteGradientThrowsAndKeepsWeights) {
  std::vector<Tensor> w{Tensor::from_rows({{1.0, 2.0}})};
  auto state = AdamState::for_weights(w, 1e-3);
  std::vector<Tensor> g{Tensor::from_rows({{0.5, std::numeric_limits<double>::quiet_NaN()}})};
  EXPECT_THROW(adam_step(w, g, state), DivergenceError);
  EXPECT_EQ(w[0], Tensor::from_rows({{1.0, 2.0}}));
  g[0][1] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(adam_step(w, g, state), DivergenceError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<Tensor> w{Tensor::from_rows({{1.0, -1.0}})};
  auto state = AdamState::for_weights(w, 0.01);
  std::vector<Tensor> g{Tensor::from_rows({{3.0, -0.2}})};
  adam_step(w, g, state);
  EXPECT_NEAR(w[0][0], 0.99, 1e-6);
  EXPECT_NEAR(w[0][1], -0.99, 1e-6);
}
