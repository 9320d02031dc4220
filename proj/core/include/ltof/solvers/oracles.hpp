#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltof/autodiff/tensor.hpp"
#include "ltof/problems/nonconvex_qp.hpp"
#include "ltof/problems/portfolio.hpp"
#include "ltof/problems/toy2d.hpp"
#include "ltof/solvers/qp.hpp"

namespace ltof::solvers {

struct OracleOptions {
  /// Stop once an iterate moves less than this (infinity norm).
  double tol = 1e-8;
  int max_iter = 20000;
  /// Multi-start count for the nonconvex solver. Start 0 is the witness; odd
  /// starts perturb it, even starts sample the objective's level set.
  int restarts = 8;
  std::uint64_t seed = 0;
  /// Initial step; 0 selects 1/L from the gradient Lipschitz bound.
  double step = 0.0;
};

struct OracleResult {
  Vector x;
  double f = 0.0;
  bool converged = false;
  int iterations = 0;
  /// Projected-gradient fixed-point residual ||x - P(x - grad)||_inf.
  double kkt_residual = 0.0;
  /// Objective reached by each restart, in restart order.
  std::vector<double> local_values;
};

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration_lambda_max(const Matrix& m, int iterations = 50);

/// Projected gradient ascent on the simplex with step 1/(2 lambda lambda_max).
OracleResult solve_portfolio_oracle(const problems::PortfolioProblem& problem, const Vector& zeta,
                                    const OracleOptions& options = {});

/// Reusable multi-start projected-gradient solver; keeps one projector so
/// successive solves share the factorization.
class NonconvexOracle {
 public:
  explicit NonconvexOracle(const problems::NonconvexQpProblem& problem);
  OracleResult solve(const Vector& zeta, const OracleOptions& options);

 private:
  OracleResult descend(const Vector& start, const Vector& zeta, const OracleOptions& options);

  /// Draw from the level set {1/2 x^T Q x <= c}, which holds every point
  /// that beats the witness when c = f(witness) + ||zeta||_1.
  Vector level_set_start(const Vector& zeta, std::mt19937_64& rng) const;

  const problems::NonconvexQpProblem& problem_;
  PolytopeProjector projector_;
  double lipschitz_q_;
  Vector q_eigenvalues_;
  Matrix q_eigenvectors_;
};

OracleResult solve_nonconvex_oracle(const problems::NonconvexQpProblem& problem, const Vector& zeta,
                                    const OracleOptions& options = {});

/// Exact minimizer by enumerating the vertices and the stationary point of
/// each edge of the feasible triangle.
OracleResult solve_toy2d_exact(const problems::Toy2DProblem& problem, const Vector& zeta);

/// Per-problem dispatch over the solvers above.
class Oracle {
 public:
  explicit Oracle(const problems::ParametricProblem& problem, OracleOptions options = {});
  ~Oracle();
  Oracle(const Oracle&) = delete;
  Oracle& operator=(const Oracle&) = delete;

  /// `record` derives the restart seed so results do not depend on call order.
  OracleResult solve(const Vector& zeta, std::uint64_t record = 0);
  const OracleOptions& options() const { return options_; }

 private:
  const problems::ParametricProblem& problem_;
  OracleOptions options_;
  std::unique_ptr<NonconvexOracle> nonconvex_;
};

struct OracleCache {
  RowMatrix x;
  std::vector<double> f;
  nlohmann::json meta = nlohmann::json::object();
};

/// Solves every row of `zetas`. Row seeds are mixed from (options.seed, row).
OracleCache build_oracle_cache(const problems::ParametricProblem& problem, const RowMatrix& zetas,
                               const OracleOptions& options = {});

/// Mixes a base seed with an index (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace ltof::solvers
