#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "ltof/io.hpp"
#include "ltof/problems/dataset.hpp"
#include "ltof/problems/nonconvex_qp.hpp"
#include "ltof/problems/toy2d.hpp"
#include "ltof/solvers/oracles.hpp"
#include "ltof/trainers/proxy.hpp"
#include "ltof/trainers/trainers.hpp"

using namespace ltof;
using namespace ltof::trainers;

namespace {

TrainingSet small_set(std::shared_ptr<const problems::ParametricProblem> problem, std::size_t samples,
                      double low, double high, std::uint64_t seed) {
  problems::PtoDataset d;
  d.zeta = problems::sample_uniform_params(samples, problem->param_dim(), low, high, seed);
  d.z = d.zeta;
  const auto cache = solvers::build_oracle_cache(*problem, d.zeta);
  d.xstar = cache.x;
  d.fstar = cache.f;
  d.split = problems::make_split(samples, 0.8, seed);
  return make_training_set(problem, d, true);
}

ModelOptions small_model() {
  ModelOptions m;
  m.hidden_width = 32;
  m.hidden_layers = 2;
  m.dropout = 0.0;
  m.batchnorm = true;
  return m;
}

TrainOptions short_train(std::size_t epochs = 8) {
  TrainOptions t;
  t.max_epochs = epochs;
  t.batch_size = 32;
  t.learning_rate = 1e-3;
  t.patience = epochs;
  return t;
}

}  // namespace

TEST(Methods, ParseAndPrintRoundTrip) {
  for (auto m : {Method::kLd, Method::kPdl, Method::kDc3, Method::kTwoStage, Method::kEpoProxy}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_method("bogus"), ConfigError);
  EXPECT_TRUE(is_ltof(Method::kDc3));
  EXPECT_FALSE(is_ltof(Method::kTwoStage));
}

TEST(Ld, MultiplierUpdateFollowsMeanViolation) {
  LdState s{Vector{{0.1, 0.1}}, Vector{{0.5}}, 0.2};
  s = ld_multiplier_update(s, Vector{{1.0, -3.0}}, Vector{{-0.5}});
  EXPECT_NEAR(s.lambda[0], 0.3, 1e-15);
  EXPECT_NEAR(s.lambda[1], 0.1, 1e-15);
  EXPECT_NEAR(s.mu[0], 0.4, 1e-15);
}

TEST(Ld, DefaultStepIsStepSizeTimesUpdatingEpochs) {
  LdOptions o;
  EXPECT_NEAR(o.step(), 0.2, 1e-15);
  problems::Toy2DProblem toy;
  const auto s = ld_initial_state(toy, o);
  EXPECT_EQ(s.lambda.size(), 3);
  EXPECT_DOUBLE_EQ(s.lambda[0], 0.1);
}

TEST(Ld, LossIsMseAtFeasiblePoints) {
  problems::Toy2DProblem toy;
  const auto s = ld_initial_state(toy, {});
  RowMatrix x(1, 2), xs(1, 2);
  x << 0.15, 0.16;
  xs << 0.18, 0.16;
  EXPECT_NEAR(ld_loss(x, xs, toy, s), 0.03 * 0.03, 1e-15);
}

TEST(Pdl, RhoGrowsByAlphaWhenViolationStalls) {
  problems::Toy2DProblem toy;
  PdlOptions o;
  o.rho0 = 1.0;
  auto s = pdl_initial_state(toy, 1, o);
  RowMatrix x(1, 2);
  x << 0.0, 0.0;  // violates x1 + x2 >= 0.3 by 0.3
  pdl_outer_update(s, x, toy);  // no previous violation yet
  EXPECT_DOUBLE_EQ(s.rho, 1.0);
  EXPECT_NEAR(s.lambda(0, 2), 0.3, 1e-12);
  pdl_outer_update(s, x, toy);
  EXPECT_DOUBLE_EQ(s.rho, 5.0);
  EXPECT_NEAR(s.lambda(0, 2), 0.6, 1e-12);
  pdl_outer_update(s, x, toy);
  EXPECT_DOUBLE_EQ(s.rho, 25.0);
  for (int i = 0; i < 10; ++i) pdl_outer_update(s, x, toy);
  EXPECT_DOUBLE_EQ(s.rho, 5000.0);
}

TEST(Pdl, RhoHoldsWhenViolationShrinks) {
  problems::Toy2DProblem toy;
  PdlOptions o;
  o.rho0 = 1.0;
  auto s = pdl_initial_state(toy, 1, o);
  RowMatrix x(1, 2);
  x << 0.0, 0.0;
  pdl_outer_update(s, x, toy);
  x << 0.1, 0.1;  // violation 0.1 < 0.8 * 0.3
  pdl_outer_update(s, x, toy);
  EXPECT_DOUBLE_EQ(s.rho, 1.0);
}

TEST(Pdl, FeasibleStartLeavesStateUnchanged) {
  problems::Toy2DProblem toy;
  PdlOptions o;
  o.rho0 = 1.0;
  auto s = pdl_initial_state(toy, 1, o);
  RowMatrix feasible(1, 2);
  feasible << 0.18, 0.16;
  pdl_outer_update(s, feasible, toy);
  pdl_outer_update(s, feasible, toy);
  EXPECT_DOUBLE_EQ(s.rho, 1.0);
  EXPECT_EQ(s.lambda, RowMatrix::Zero(1, 3));
}

TEST(Dc3, CompletionSatisfiesEqualities) {
  const auto p = problems::generate_nonconvex_instance(12, 5, 5, 3);
  Dc3Completion c(p->constraints());
  EXPECT_EQ(c.n_partial(), 7u);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  RowMatrix xp(50, 7);
  for (Eigen::Index i = 0; i < xp.size(); ++i) xp.data()[i] = u(rng);
  const RowMatrix x = c.complete(xp);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    EXPECT_LE(p->eq_residual(x.row(r).transpose()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Dc3, CorrectionNeverIncreasesViolation) {
  const auto p = problems::generate_nonconvex_instance(12, 5, 5, 4);
  Dc3Completion c(p->constraints());
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  RowMatrix xp(40, 7);
  for (Eigen::Index i = 0; i < xp.size(); ++i) xp.data()[i] = u(rng);
  CorrectionTrace trace;
  const RowMatrix corrected = c.correct(xp, 10, 1e-2, &trace);
  ASSERT_EQ(trace.max_increase.size(), 10u);
  for (double d : trace.max_increase) EXPECT_LE(d, 0.0);
  EXPECT_LE(c.row_violation(corrected).sum(), c.row_violation(xp).sum());
}

TEST(Training, LtofMethodsAreDeterministicInSeed) {
  auto toy = std::make_shared<problems::Toy2DProblem>();
  const auto set = small_set(toy, 200, 1.0, 2.0, 5);
  for (auto m : {Method::kLd, Method::kPdl, Method::kDc3}) {
    const auto a = train_ltof(m, set, small_model(), short_train(4), {});
    const auto b = train_ltof(m, set, small_model(), short_train(4), {});
    EXPECT_TRUE(a.proxy.net == b.proxy.net) << to_string(m);
    EXPECT_EQ(a.history.to_csv(), b.history.to_csv()) << to_string(m);
  }
}

TEST(Training, HistoriesRecordMultiplierInvariants) {
  auto toy = std::make_shared<problems::Toy2DProblem>();
  const auto set = small_set(toy, 300, 1.0, 2.0, 6);
  const auto ld = train_ltof(Method::kLd, set, small_model(), short_train(12), {});
  for (const auto& e : ld.history.epochs) EXPECT_GE(e.lambda_min, 0.0);
  const auto pdl = train_ltof(Method::kPdl, set, small_model(), short_train(12), {});
  double prev = 0.0;
  for (const auto& e : pdl.history.epochs) {
    EXPECT_GE(e.rho, prev);
    EXPECT_LE(e.rho, 5000.0);
    prev = e.rho;
  }
}

TEST(Training, Dc3KeepsEqualitiesDuringTraining) {
  auto p = problems::generate_nonconvex_instance(8, 3, 3, 7);
  const auto set = small_set(p, 200, -1.0, 1.0, 7);
  const auto r = train_ltof(Method::kDc3, set, small_model(), short_train(4), {});
  for (const auto& e : r.history.epochs) {
    EXPECT_LE(e.eq_residual, 1e-9);
    EXPECT_LE(e.correction_increase, 0.0);
  }
  const RowMatrix x = r.proxy.predict(set.z_test);
  for (Eigen::Index i = 0; i < x.rows(); ++i) EXPECT_LE(p->eq_residual(x.row(i).transpose()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Training, EarlyStoppingKeepsBestEpoch) {
  auto toy = std::make_shared<problems::Toy2DProblem>();
  const auto set = small_set(toy, 200, 1.0, 2.0, 8);
  auto t = short_train(40);
  t.patience = 2;
  const auto r = train_ltof(Method::kPdl, set, small_model(), t, {});
  const auto& h = r.history;
  ASSERT_GE(h.best_epoch, 1u);
  double best = INFINITY;
  for (const auto& e : h.epochs) best = std::min(best, e.test_metric);
  EXPECT_DOUBLE_EQ(h.epochs[h.best_epoch - 1].test_metric, best);
  if (h.early_stop_epoch > 0) {
    EXPECT_EQ(h.early_stop_epoch, h.best_epoch + t.patience);
  }
}

TEST(Training, TwoStageLearnsIdentityMap) {
  auto toy = std::make_shared<problems::Toy2DProblem>();
  const auto set = small_set(toy, 400, 1.0, 2.0, 9);
  auto t = short_train(60);
  const auto r = train_two_stage(set, small_model(), t, {1});
  const RowMatrix pred = r.proxy.predict(set.z_test);
  EXPECT_LT((pred - set.zeta_test).cwiseAbs().maxCoeff(), 0.1);
}

TEST(Proxy, SaveLoadReproducesPredictions) {
  auto p = problems::generate_nonconvex_instance(8, 3, 3, 1);
  const auto set = small_set(p, 100, -1.0, 1.0, 1);
  const auto r = train_ltof(Method::kDc3, set, small_model(), short_train(2), {});
  const auto path = (std::filesystem::temp_directory_path() / "ltof_proxy_test.json").string();
  save_proxy(r.proxy, path);
  const Proxy back = load_proxy(path, &p->constraints());
  EXPECT_EQ(back.predict(set.z_test), r.proxy.predict(set.z_test));
  std::filesystem::remove(path);
}
