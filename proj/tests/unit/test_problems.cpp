#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "ltof/autodiff/tape.hpp"
#include "ltof/problems/dataset.hpp"
#include "ltof/problems/nonconvex_qp.hpp"
#include "ltof/problems/portfolio.hpp"
#include "ltof/problems/toy2d.hpp"
#include "gradcheck.hpp"

using namespace ltof;
using namespace ltof::problems;

namespace {

Vector random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = u(rng);
  return v;
}

std::shared_ptr<PortfolioProblem> small_portfolio() {
  PortfolioDataConfig cfg;
  cfg.assets = 6;
  cfg.samples = 40;
  cfg.periods = 40;
  return generate_portfolio_data(cfg).problem;
}

void check_gradients(const ParametricProblem& p, std::uint64_t seed) {
  EXPECT_LT(ltof::testing::problem_gradient_error(p, 20, seed), 1e-6) << p.id();
}

void check_batch_objective(const ParametricProblem& p) {
  std::mt19937_64 rng(3);
  RowMatrix X(4, p.n()), Z(4, p.param_dim());
  for (int r = 0; r < 4; ++r) {
    X.row(r) = random_vector(p.n(), rng).transpose();
    Z.row(r) = random_vector(p.param_dim(), rng).transpose();
  }
  ad::Tape tape;
  const auto f = p.objective_node(tape, tape.constant(Tensor::from_eigen(X)), tape.constant(Tensor::from_eigen(Z)));
  const Tensor& v = tape.value(f);
  ASSERT_EQ(v.rows(), 4u);
  for (int r = 0; r < 4; ++r) {
    EXPECT_NEAR(v.at(r, 0), p.objective(X.row(r).transpose(), Z.row(r).transpose()), 1e-12) << p.id();
  }
}

}  // namespace

TEST(Portfolio, GradientsMatchFiniteDifferences) { check_gradients(*small_portfolio(), 1); }
TEST(NonconvexQp, GradientsMatchFiniteDifferences) { check_gradients(*generate_nonconvex_instance(8, 3, 3, 2), 2); }
TEST(Toy2D, GradientsMatchFiniteDifferences) { check_gradients(Toy2DProblem(), 3); }

TEST(Problems, BatchObjectiveMatchesScalarObjective) {
  check_batch_objective(*small_portfolio());
  check_batch_objective(*generate_nonconvex_instance(8, 3, 3, 2));
  check_batch_objective(Toy2DProblem());
}

TEST(Portfolio, CovarianceIsSymmetricPsd) {
  const auto p = small_portfolio();
  const Matrix& s = p->sigma();
  EXPECT_LT((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(Portfolio, ObjectiveIsConcave) {
  const auto p = small_portfolio();
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const Vector a = random_vector(p->n(), rng), b = random_vector(p->n(), rng), z = random_vector(p->n(), rng);
    EXPECT_GE(p->objective(0.5 * (a + b), z) + 1e-12, 0.5 * (p->objective(a, z) + p->objective(b, z)));
  }
}

TEST(Portfolio, ConstraintsAreTheSimplex) {
  const auto p = small_portfolio();
  Vector x = Vector::Constant(p->n(), 1.0 / p->n());
  EXPECT_LT(p->max_violation(x), 1e-15);
  x[1] += x[0] + 0.1;
  x[0] = -0.1;
  EXPECT_NEAR(p->max_violation(x), 0.1, 1e-12);
}

TEST(Portfolio, DataGenerationIsDeterministic) {
  PortfolioDataConfig cfg;
  cfg.assets = 5;
  cfg.factors = 2;
  cfg.samples = 30;
  cfg.periods = 20;
  const auto a = generate_portfolio_data(cfg), b = generate_portfolio_data(cfg);
  EXPECT_EQ(a.zetas, b.zetas);
  EXPECT_EQ(a.problem->sigma(), b.problem->sigma());
  cfg.seed = 1;
  EXPECT_NE(generate_portfolio_data(cfg).zetas, a.zetas);
}

TEST(NonconvexQp, WitnessIsFeasibleAndQIsPsd) {
  const auto p = generate_nonconvex_instance(20, 10, 10, 5);
  EXPECT_LT(p->max_violation(p->witness()), 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(p->Q());
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
}

TEST(Toy2D, VerticesAreTheTriangleCorners) {
  Toy2DProblem p;
  const auto v = p.vertices();
  const Vector expected[3] = {Vector{{0.18, 0.16}}, Vector{{0.1, 0.2}}, Vector{{1.0 / 6.0, 2.0 / 15.0}}};
  for (const auto& e : expected) {
    double best = 1.0;
    for (const auto& c : v) best = std::min(best, (c - e).norm());
    EXPECT_LT(best, 1e-12);
  }
  for (const auto& c : v) EXPECT_LT(p.max_violation(c), 1e-12);
  EXPECT_GT(p.max_violation(Vector{{0.0, 0.0}}), 0.0);
}

TEST(Regret, SignFollowsSense) {
  Toy2DProblem toy;
  const Vector x{{0.18, 0.16}}, z{{1.0, 1.0}};
  const double f = toy.objective(x, z);
  EXPECT_NEAR(regret(toy, x, z, f - 0.01).value, 0.01, 1e-15);
  const auto port = small_portfolio();
  const Vector u = Vector::Constant(port->n(), 1.0 / port->n());
  const Vector zp = Vector::Ones(port->n());
  const double fp = port->objective(u, zp);
  const auto r = regret(*port, u, zp, fp + 0.02);
  EXPECT_NEAR(r.value, 0.02, 1e-15);
  EXPECT_TRUE(r.feasible);
  Vector bad = u;
  bad[0] += 0.5;
  EXPECT_FALSE(regret(*port, bad, zp, fp).feasible);
}

TEST(Regret, PercentageUsesAbsoluteOptimum) {
  EXPECT_DOUBLE_EQ(percentage_regret(0.5, -2.0).value, 25.0);
  EXPECT_DOUBLE_EQ(percentage_regret(0.5, 2.0).value, 25.0);
  const auto tiny = percentage_regret(0.5, 0.0);
  EXPECT_TRUE(tiny.absolute);
  EXPECT_DOUBLE_EQ(tiny.value, 0.5);
}

TEST(Dataset, SplitIsDeterministicAndSized) {
  const auto a = make_split(1000, 0.9, 17), b = make_split(1000, 0.9, 17), c = make_split(1000, 0.9, 18);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(std::count(a.begin(), a.end(), Split::kTrain), 900);
}

TEST(Dataset, CsvRoundTripIsExact) {
  std::mt19937_64 rng(6);
  PtoDataset d;
  d.z = RowMatrix(12, 3);
  d.zeta = RowMatrix(12, 2);
  RowMatrix xs(12, 2);
  for (int r = 0; r < 12; ++r) {
    d.z.row(r) = random_vector(3, rng).transpose();
    d.zeta.row(r) = random_vector(2, rng).transpose();
    xs.row(r) = random_vector(2, rng).transpose();
    d.fstar.push_back(std::sin(r) / 3.0);
  }
  d.xstar = xs;
  d.split = make_split(12, 0.75, 1);
  d.metadata["note"] = "unit";
  const auto dir = std::filesystem::temp_directory_path() / "ltof_dataset_test";
  std::filesystem::create_directories(dir);
  save_dataset(d, (dir / "d.csv").string(), (dir / "d.json").string());
  const auto back = load_dataset((dir / "d.csv").string(), (dir / "d.json").string());
  EXPECT_EQ(back.z, d.z);
  EXPECT_EQ(back.zeta, d.zeta);
  ASSERT_TRUE(back.xstar.has_value());
  EXPECT_EQ(*back.xstar, xs);
  EXPECT_EQ(back.fstar, d.fstar);
  EXPECT_EQ(back.split, d.split);
  EXPECT_EQ(back.metadata["note"], "unit");
  std::filesystem::remove_all(dir);
}
