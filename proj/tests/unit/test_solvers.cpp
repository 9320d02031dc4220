#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ltof/problems/nonconvex_qp.hpp"
#include "ltof/problems/portfolio.hpp"
#include "ltof/problems/toy2d.hpp"
#include "ltof/solvers/oracles.hpp"
#include "ltof/solvers/qp.hpp"
#include "ltof/solvers/restore.hpp"
#include "ltof/solvers/simplex.hpp"

using namespace ltof;
using namespace ltof::solvers;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

/// Stationarity, primal feasibility, dual sign and complementarity, worst of all.
double kkt_error(const Matrix& P, const Vector& q, const Matrix& A, const Vector& b, const Matrix& G,
                 const Vector& h, const QpSolution& s) {
  double e = (P * s.x + q + A.transpose() * s.lambda_eq + G.transpose() * s.lambda_ineq).cwiseAbs().maxCoeff();
  if (A.rows() > 0) e = std::max(e, (A * s.x - b).cwiseAbs().maxCoeff());
  if (G.rows() > 0) {
    const Vector slack = G * s.x - h;
    e = std::max(e, slack.maxCoeff());
    e = std::max(e, (-s.lambda_ineq).maxCoeff());
    e = std::max(e, s.lambda_ineq.cwiseProduct(slack).cwiseAbs().maxCoeff());
  }
  return std::max(e, 0.0);
}

}  // namespace

TEST(Simplex, ProjectionExamples) {
  EXPECT_TRUE(project_simplex(Vector{{0.3, 0.7}}).isApprox(Vector{{0.3, 0.7}}));
  EXPECT_TRUE(project_simplex(Vector{{2.0, 0.0}}).isApprox(Vector{{1.0, 0.0}}));
  EXPECT_TRUE(project_simplex(Vector{{1.0, 1.0, 1.0}}).isApprox(Vector::Constant(3, 1.0 / 3.0)));
  EXPECT_TRUE(project_simplex(Vector{{0.5, 0.0, -0.5}}).isApprox(Vector{{0.75, 0.25, 0.0}}));
}

TEST(Simplex, ProjectionIsFeasibleAndIdempotent) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    const Vector p = project_simplex(random_vector(7, rng, -2.0, 2.0));
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_GE(p.minCoeff(), 0.0);
    EXPECT_LT((project_simplex(p) - p).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Simplex, ClipNormalizeExamples) {
  const auto r = clip_normalize(Vector{{-1.0, 1.0, 1.0}});
  EXPECT_FALSE(r.fallback);
  EXPECT_TRUE(r.x.isApprox(Vector{{0.0, 0.5, 0.5}}));
  const auto f = clip_normalize(Vector{{-1.0, -2.0, 0.0, -0.1}});
  EXPECT_TRUE(f.fallback);
  EXPECT_TRUE(f.x.isApprox(Vector::Constant(4, 0.25)));
}

TEST(Qp, RandomInstancesSatisfyKkt) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 8, m_eq = 3, m_in = 6;
    const Matrix M = random_matrix(n, n, rng);
    const Matrix P = M.transpose() * M + 0.1 * Matrix::Identity(n, n);
    const Vector q = random_vector(n, rng);
    const Matrix A = random_matrix(m_eq, n, rng), G = random_matrix(m_in, n, rng);
    const Vector x0 = random_vector(n, rng);
    const Vector b = A * x0;
    const Vector h = G * x0 + random_vector(m_in, rng, 0.0, 1.0);
    const auto s = qp_solve(P, q, A, b, G, h);
    EXPECT_EQ(s.status, QpStatus::kConverged);
    EXPECT_LT(kkt_error(P, q, A, b, G, h, s), 1e-5) << "trial " << trial;
  }
}

TEST(Qp, WarmStartedWorkspaceAgreesWithColdSolve) {
  std::mt19937_64 rng(3);
  const Eigen::Index n = 6;
  const Matrix M = random_matrix(n, n, rng);
  const Matrix P = M.transpose() * M + Matrix::Identity(n, n);
  const Matrix A = random_matrix(2, n, rng), G = random_matrix(4, n, rng);
  QpWorkspace ws(P, A, G);
  for (int i = 0; i < 10; ++i) {
    const Vector q = random_vector(n, rng), b = random_vector(2, rng), h = random_vector(4, rng, 1.0, 2.0);
    const auto warm = ws.solve(q, b, h);
    const auto cold = qp_solve(P, q, A, b, G, h);
    EXPECT_LT((warm.x - cold.x).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(Projection, PolytopeProjectionIsFeasibleAndIdempotent) {
  const auto p = problems::generate_nonconvex_instance(10, 4, 4, 9);
  PolytopeProjector proj(p->constraints());
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const Vector y = random_vector(10, rng, -3.0, 3.0);
    const Vector x = proj.project(y);
    EXPECT_LT(p->max_violation(x), 1e-6);
    EXPECT_LT((proj.project(x) - x).cwiseAbs().maxCoeff(), 1e-6);
    // No feasible point is closer: the witness is feasible.
    EXPECT_LE((x - y).norm(), (p->witness() - y).norm() + 1e-6);
  }
}

TEST(Restorer, UsesTheDeclaredStrategy) {
  problems::PortfolioDataConfig cfg;
  cfg.assets = 3;
  cfg.factors = 2;
  cfg.samples = 10;
  cfg.periods = 10;
  const auto port = problems::generate_portfolio_data(cfg).problem;
  Restorer r(*port);
  EXPECT_TRUE(r.restore(Vector{{-1.0, 1.0, 1.0}}).x.isApprox(Vector{{0.0, 0.5, 0.5}}));
  problems::Toy2DProblem toy;
  Restorer t(toy);
  EXPECT_LT(toy.max_violation(t.restore(Vector{{0.0, 0.0}}).x), 1e-8);
}

TEST(Oracle, PortfolioMatchesGridOnThreeAssets) {
  problems::PortfolioDataConfig cfg;
  cfg.assets = 3;
  cfg.factors = 2;
  cfg.samples = 20;
  cfg.periods = 20;
  const auto data = problems::generate_portfolio_data(cfg);
  for (Eigen::Index r = 0; r < data.zetas.rows(); ++r) {
    const Vector z = data.zetas.row(r).transpose();
    double grid = -INFINITY;
    for (int i = 0; i <= 100; ++i) {
      for (int j = 0; i + j <= 100; ++j) {
        const Vector x{{i / 100.0, j / 100.0, (100 - i - j) / 100.0}};
        grid = std::max(grid, data.problem->objective(x, z));
      }
    }
    const auto sol = solve_portfolio_oracle(*data.problem, z);
    EXPECT_GE(sol.f, grid - 1e-9);
    EXPECT_LT(data.problem->max_violation(sol.x), 1e-12);
  }
}

TEST(Oracle, Toy2DExactBeatsGrid) {
  problems::Toy2DProblem toy;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector z = random_vector(2, rng, 1.0, 2.0);
    const auto sol = solve_toy2d_exact(toy, z);
    double grid = INFINITY;
    for (int i = 0; i <= 400; ++i) {
      for (int j = 0; j <= 400; ++j) {
        const Vector x{{0.1 + 0.08 * i / 400.0, 0.13 + 0.07 * j / 400.0}};
        if (toy.max_violation(x) <= 0.0) grid = std::min(grid, toy.objective(x, z));
      }
    }
    EXPECT_LE(sol.f, grid + 1e-12);
    EXPECT_LT(toy.max_violation(sol.x), 1e-12);
  }
}

TEST(Oracle, NonconvexMatchesGridInTwoDimensions) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = problems::generate_nonconvex_instance(2, 0, 3, seed);
    std::mt19937_64 rng(seed);
    const Vector z = random_vector(2, rng);
    const auto sol = solve_nonconvex_oracle(*p, z);
    const double R = std::max(15.0, 2.0 * sol.x.cwiseAbs().maxCoeff());
    double grid = INFINITY;
    for (int i = 0; i <= 1200; ++i) {
      for (int j = 0; j <= 1200; ++j) {
        const Vector x{{-R + 2.0 * R * i / 1200.0, -R + 2.0 * R * j / 1200.0}};
        if (p->max_violation(x) <= 0.0) grid = std::min(grid, p->objective(x, z));
      }
    }
    EXPECT_LE(sol.f, grid + 1e-3) << "seed " << seed;
    EXPECT_LT(p->max_violation(sol.x), 1e-6);
  }
}

TEST(Oracle, CacheIsDeterministic) {
  const auto p = problems::generate_nonconvex_instance(6, 2, 2, 1);
  const RowMatrix z = problems::sample_uniform_params(8, 6, -1.0, 1.0, 3);
  const auto a = build_oracle_cache(*p, z), b = build_oracle_cache(*p, z);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.f, b.f);
}

TEST(Seeds, MixSeedSeparatesIndices) {
  EXPECT_NE(mix_seed(0, 1), mix_seed(0, 2));
  EXPECT_NE(mix_seed(1, 1), mix_seed(0, 1));
  EXPECT_EQ(mix_seed(5, 7), mix_seed(5, 7));
}
