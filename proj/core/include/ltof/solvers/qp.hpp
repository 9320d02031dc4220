#pragma once

#include <optional>
#include <string>

#include "ltof/autodiff/tensor.hpp"
#include "ltof/problems/problem.hpp"

namespace ltof::solvers {

enum class QpStatus { kConverged, kMaxIter, kPrimalInfeasible, kDualInfeasible };

std::string to_string(QpStatus status);

struct QpSolution {
  Vector x;
  Vector lambda_eq;
  Vector lambda_ineq;
  QpStatus status = QpStatus::kMaxIter;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  bool polished = false;
};

struct QpSettings {
  double tol = 1e-6;
  int max_iter = 20000;
  double rho = 1.0;
  /// Equality rows use rho * eq_rho_scale.
  double eq_rho_scale = 1e3;
  double sigma = 1e-6;
  double relaxation = 1.6;
  /// Residual-balancing period in iterations; 0 disables adaptation.
  int adapt_interval = 25;
  int check_interval = 5;
  bool polish = true;
};

/// Operator-splitting (ADMM) solver for
///   minimize 1/2 x^T P x + q^T x  s.t.  A x = b, G x <= h,
/// with the KKT factorization cached across solves that share P, A and G.
/// Iterates are kept between calls and reused as a warm start.
class QpWorkspace {
 public:
  QpWorkspace(Matrix P, Matrix A, Matrix G, QpSettings settings = {});

  QpSolution solve(const Vector& q, const Vector& b, const Vector& h);
  void reset_warm_start();

  const QpSettings& settings() const { return settings_; }
  std::size_t n() const { return static_cast<std::size_t>(P_.rows()); }

 private:
  void factorize();
  bool try_polish(const Vector& q, const Vector& b, const Vector& h, QpSolution& sol) const;

  Matrix P_;
  Matrix A_;
  Matrix G_;
  Matrix C_;
  QpSettings settings_;
  double rho_;
  Vector rho_vec_;
  Eigen::LLT<Matrix> llt_;
  Vector x_;
  Vector z_;
  Vector y_;
};

QpSolution qp_solve(const Matrix& P, const Vector& q, const Matrix& A, const Vector& b,
                    const Matrix& G, const Vector& h, const QpSettings& settings = {});

/// Euclidean projection onto a fixed polytope, reusing one factorization.
class PolytopeProjector {
 public:
  explicit PolytopeProjector(const problems::LinearConstraints& constraints, double tol = 1e-9);

  /// Throws std::runtime_error when the projection does not converge.
  Vector project(const Vector& x_hat);
  QpSolution project_detailed(const Vector& x_hat);

 private:
  problems::LinearConstraints constraints_;
  QpWorkspace workspace_;
};

/// One-shot projection: qp_solve with P = I, q = -x_hat.
Vector project_polytope(const Vector& x_hat, const Matrix& A, const Vector& b, const Matrix& G,
                        const Vector& h, double tol = 1e-9);

}  // namespace ltof::solvers
