#pragma once

#include <cstdint>
#include <memory>

#include "ltof/problems/problem.hpp"

namespace ltof::problems {

/// minimize 1/2 x^T Q x + zeta^T sin(x)  s.t.  A x = b, G x <= h.
class NonconvexQpProblem final : public ParametricProblem {
 public:
  NonconvexQpProblem(Matrix Q, LinearConstraints constraints, Vector witness);

  std::string id() const override { return "nonconvex_qp"; }
  std::size_t n() const override { return static_cast<std::size_t>(Q_.rows()); }
  std::size_t param_dim() const override { return n(); }
  Sense sense() const override { return Sense::kMinimize; }
  Restoration restoration() const override { return Restoration::kPolytopeProjection; }

  double objective(const Vector& x, const Vector& zeta) const override;
  Vector grad_x(const Vector& x, const Vector& zeta) const override;
  Vector grad_zeta(const Vector& x, const Vector& zeta) const override;
  ad::NodeId objective_node(ad::Tape& tape, ad::NodeId x, ad::NodeId zeta) const override;

  const Matrix& Q() const { return Q_; }
  /// A point with A x0 = b and G x0 <= h, stored at generation time.
  const Vector& witness() const { return witness_; }

 private:
  Matrix Q_;
  Vector witness_;
};

/// Q = M^T M / n with M uniform in [-1, 1]; A, G uniform in [-1, 1]; the
/// right-hand sides come from a witness x0 in [-1, 1]^n as b = A x0 and
/// h = G x0 + s with slack s uniform in [0, 1].
std::shared_ptr<NonconvexQpProblem> generate_nonconvex_instance(std::size_t n, std::size_t n_eq,
                                                                std::size_t n_ineq,
                                                                std::uint64_t seed);

/// samples x n parameter draws, uniform in [low, high].
RowMatrix sample_uniform_params(std::size_t samples, std::size_t dim, double low, double high,
                                std::uint64_t seed);

}  // namespace ltof::problems
