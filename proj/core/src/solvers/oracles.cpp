#include "ltof/solvers/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "ltof/solvers/simplex.hpp"

namespace ltof::solvers {

namespace {

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double power_iteration_lambda_max(const Matrix& m, int iterations) {
  if (m.rows() == 0) return 0.0;
  Vector v = Vector::Ones(m.rows()) / std::sqrt(static_cast<double>(m.rows()));
  double lambda = 0.0;
  for (int i = 0; i < iterations; ++i) {
    Vector w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    lambda = v.dot(w);
    v = w / norm;
  }
  // Rayleigh quotient underestimates; the norm ratio bounds from above for PSD.
  return std::max(lambda, (m * v).norm());
}

OracleResult solve_portfolio_oracle(const problems::PortfolioProblem& problem, const Vector& zeta,
                                    const OracleOptions& options) {
  const auto n = static_cast<Eigen::Index>(problem.n());
  if (zeta.size() != n) throw ShapeError("portfolio oracle: zeta has the wrong length");
  const double lmax = power_iteration_lambda_max(problem.sigma());
  const double step =
      options.step > 0.0 ? options.step : 1.0 / (2.0 * problem.risk_weight() * lmax + 1e-12);

  OracleResult out;
  Vector x = Vector::Constant(n, 1.0 / static_cast<double>(n));
  for (int it = 1; it <= options.max_iter; ++it) {
    Vector next = project_simplex(x + step * problem.grad_x(x, zeta));
    const double move = inf_norm(next - x);
    x = std::move(next);
    out.iterations = it;
    if (move < options.tol) {
      out.converged = true;
      break;
    }
  }
  out.x = x;
  out.f = problem.objective(x, zeta);
  out.kkt_residual = inf_norm(x - project_simplex(x + problem.grad_x(x, zeta)));
  out.local_values = {out.f};
  return out;
}

NonconvexOracle::NonconvexOracle(const problems::NonconvexQpProblem& problem)
    : problem_(problem),
      projector_(problem.constraints()),
      lipschitz_q_(power_iteration_lambda_max(problem.Q())) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(problem.Q());
  q_eigenvalues_ = eig.eigenvalues();
  q_eigenvectors_ = eig.eigenvectors();
}

Vector NonconvexOracle::level_set_start(const Vector& zeta, std::mt19937_64& rng) const {
  const auto n = static_cast<Eigen::Index>(problem_.n());
  const double c = std::max(problem_.objective(problem_.witness(), zeta), 0.0) + zeta.lpNorm<1>();
  // Uniform direction, radius U^(1/n), scaled per eigen-axis of Q.
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector u(n);
  for (Eigen::Index i = 0; i < n; ++i) u(i) = normal(rng);
  u *= std::pow(unit(rng), 1.0 / static_cast<double>(n)) / std::max(u.norm(), 1e-300);
  constexpr double kMaxRadius = 1e3;
  Vector coords(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lam = std::max(q_eigenvalues_(i), 0.0);
    const double radius = lam > 0.0 ? std::min(std::sqrt(2.0 * c / lam), kMaxRadius) : kMaxRadius;
    coords(i) = radius * u(i);
  }
  return q_eigenvectors_ * coords;
}

OracleResult NonconvexOracle::descend(const Vector& start, const Vector& zeta,
                                      const OracleOptions& options) {
  double step = options.step > 0.0 ? options.step : 1.0 / (lipschitz_q_ + inf_norm(zeta) + 1e-12);
  OracleResult out;
  Vector x = start;
  double f = problem_.objective(x, zeta);
  for (int it = 1; it <= options.max_iter; ++it) {
    out.iterations = it;
    Vector next = projector_.project(x - step * problem_.grad_x(x, zeta));
    const double f_next = problem_.objective(next, zeta);
    if (f_next > f + 1e-14 * std::max(1.0, std::abs(f))) {
      step *= 0.5;
      if (step < 1e-12) break;
      continue;
    }
    const double move = inf_norm(next - x);
    x = std::move(next);
    f = f_next;
    if (move < options.tol) {
      out.converged = true;
      break;
    }
  }
  out.x = x;
  out.f = f;
  return out;
}

OracleResult NonconvexOracle::solve(const Vector& zeta, const OracleOptions& options) {
  if (options.restarts < 1) throw std::invalid_argument("nonconvex oracle needs restarts >= 1");
  const auto n = static_cast<Eigen::Index>(problem_.n());
  if (zeta.size() != n) throw ShapeError("nonconvex oracle: zeta has the wrong length");

  OracleResult best;
  best.f = std::numeric_limits<double>::infinity();
  std::vector<double> values;
  int total_iterations = 0;
  for (int r = 0; r < options.restarts; ++r) {
    Vector start = problem_.witness();
    if (r > 0) {
      std::mt19937_64 rng(mix_seed(options.seed, static_cast<std::uint64_t>(r)));
      Vector perturbed = start;
      if (r % 2 == 1) {
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (Eigen::Index i = 0; i < n; ++i) perturbed(i) += dist(rng);
      } else {
        perturbed = level_set_start(zeta, rng);
      }
      start = projector_.project(perturbed);
    }
    OracleResult local = descend(start, zeta, options);
    values.push_back(local.f);
    total_iterations += local.iterations;
    // Strict comparison: the lowest-index restart wins ties.
    if (local.f < best.f) best = std::move(local);
  }
  best.local_values = std::move(values);
  best.iterations = total_iterations;
  best.kkt_residual = inf_norm(best.x - projector_.project(best.x - problem_.grad_x(best.x, zeta)));
  return best;
}

OracleResult solve_nonconvex_oracle(const problems::NonconvexQpProblem& problem, const Vector& zeta,
                                    const OracleOptions& options) {
  NonconvexOracle oracle(problem);
  return oracle.solve(zeta, options);
}

OracleResult solve_toy2d_exact(const problems::Toy2DProblem& problem, const Vector& zeta) {
  if (zeta.size() != 2) throw ShapeError("toy2d oracle: zeta must have two entries");
  // The only interior critical point of the objective is the origin, which
  // lies outside the triangle, so a minimizer sits on an edge.
  const auto verts = problem.vertices();
  OracleResult out;
  out.f = std::numeric_limits<double>::infinity();
  auto consider = [&](const Vector& x) {
    const double f = problem.objective(x, zeta);
    if (f < out.f) {
      out.f = f;
      out.x = x;
    }
  };
  for (std::size_t e = 0; e < 3; ++e) {
    const Vector& a = verts[e];
    const Vector& d = verts[(e + 1) % 3] - a;
    consider(a);
    // f(a + t d) = sum zeta_i (a_i + t d_i)^2; stationary where the slope vanishes.
    const double curvature = zeta(0) * d(0) * d(0) + zeta(1) * d(1) * d(1);
    const double slope = zeta(0) * a(0) * d(0) + zeta(1) * a(1) * d(1);
    if (curvature > 0.0) {
      const double t = -slope / curvature;
      if (t > 0.0 && t < 1.0) consider(a + t * d);
    }
  }
  out.converged = true;
  out.local_values = {out.f};
  return out;
}

Oracle::Oracle(const problems::ParametricProblem& problem, OracleOptions options)
    : problem_(problem), options_(options) {
  if (const auto* nc = dynamic_cast<const problems::NonconvexQpProblem*>(&problem)) {
    nonconvex_ = std::make_unique<NonconvexOracle>(*nc);
  } else if (dynamic_cast<const problems::PortfolioProblem*>(&problem) == nullptr &&
             dynamic_cast<const problems::Toy2DProblem*>(&problem) == nullptr) {
    throw std::invalid_argument("no oracle registered for problem " + problem.id());
  }
}

Oracle::~Oracle() = default;

OracleResult Oracle::solve(const Vector& zeta, std::uint64_t record) {
  if (nonconvex_) {
    OracleOptions opts = options_;
    opts.seed = mix_seed(options_.seed, record);
    return nonconvex_->solve(zeta, opts);
  }
  if (const auto* p = dynamic_cast<const problems::PortfolioProblem*>(&problem_)) {
    return solve_portfolio_oracle(*p, zeta, options_);
  }
  return solve_toy2d_exact(static_cast<const problems::Toy2DProblem&>(problem_), zeta);
}

OracleCache build_oracle_cache(const problems::ParametricProblem& problem, const RowMatrix& zetas,
                               const OracleOptions& options) {
  Oracle oracle(problem, options);
  OracleCache cache;
  cache.x.resize(zetas.rows(), static_cast<Eigen::Index>(problem.n()));
  cache.f.resize(static_cast<std::size_t>(zetas.rows()));
  int unconverged = 0;
  double worst_kkt = 0.0;
  for (Eigen::Index i = 0; i < zetas.rows(); ++i) {
    const OracleResult r = oracle.solve(zetas.row(i).transpose(), static_cast<std::uint64_t>(i));
    cache.x.row(i) = r.x.transpose();
    cache.f[static_cast<std::size_t>(i)] = r.f;
    if (!r.converged) ++unconverged;
    worst_kkt = std::max(worst_kkt, r.kkt_residual);
  }
  cache.meta = {{"solver", problem.id() + "_oracle"},
                {"tol", options.tol},
                {"max_iter", options.max_iter},
                {"restarts", options.restarts},
                {"seed", options.seed},
                {"unconverged", unconverged},
                {"max_kkt_residual", worst_kkt}};
  return cache;
}

}  // namespace ltof::solvers
