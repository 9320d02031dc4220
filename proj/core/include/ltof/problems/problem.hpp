#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "ltof/autodiff/tape.hpp"
#include "ltof/autodiff/tensor.hpp"

namespace ltof::problems {

enum class Sense { kMinimize, kMaximize };

/// How a proxy output is mapped back onto the feasible set at evaluation.
enum class Restoration { kClipNormalize, kPolytopeProjection };

/// Polyhedral feasible set {x : A x = b, G x <= h}.
struct LinearConstraints {
  Matrix A;
  Vector b;
  Matrix G;
  Vector h;

  std::size_t n_eq() const { return static_cast<std::size_t>(A.rows()); }
  std::size_t n_ineq() const { return static_cast<std::size_t>(G.rows()); }
};

/// Parametric program  opt_x f(x, zeta)  s.t.  g(x) <= 0, h(x) = 0  with
/// g(x) = G x - h and h(x) = A x - b. Objective evaluators are virtual; the
/// constraint evaluators are shared because every problem here is polyhedral.
class ParametricProblem {
 public:
  explicit ParametricProblem(LinearConstraints constraints) : constraints_(std::move(constraints)) {}
  virtual ~ParametricProblem() = default;

  virtual std::string id() const = 0;
  virtual std::size_t n() const = 0;
  virtual std::size_t param_dim() const = 0;
  virtual Sense sense() const = 0;
  virtual Restoration restoration() const = 0;

  virtual double objective(const Vector& x, const Vector& zeta) const = 0;
  virtual Vector grad_x(const Vector& x, const Vector& zeta) const = 0;
  virtual Vector grad_zeta(const Vector& x, const Vector& zeta) const = 0;

  /// Row-wise objective for a batch: x is B x n, zeta is B x p; returns B x 1.
  virtual ad::NodeId objective_node(ad::Tape& tape, ad::NodeId x, ad::NodeId zeta) const = 0;

  std::size_t n_eq() const { return constraints_.n_eq(); }
  std::size_t n_ineq() const { return constraints_.n_ineq(); }
  const LinearConstraints& constraints() const { return constraints_; }

  Vector ineq_residual(const Vector& x) const;
  Vector eq_residual(const Vector& x) const;
  const Matrix& ineq_jacobian() const { return constraints_.G; }
  const Matrix& eq_jacobian() const { return constraints_.A; }

  /// B x n_ineq node of G x - h (empty constraints yield a B x 0 node).
  ad::NodeId ineq_node(ad::Tape& tape, ad::NodeId x) const;
  ad::NodeId eq_node(ad::Tape& tape, ad::NodeId x) const;

  /// +1 for minimization, -1 for maximization: losses minimize sign * f.
  double sense_sign() const { return sense() == Sense::kMinimize ? 1.0 : -1.0; }

  /// Mean over constraints of max(g_j, 0) and |h_j|.
  double violation(const Vector& x) const;
  /// Largest single violation; 0 when feasible.
  double max_violation(const Vector& x) const;

 protected:
  LinearConstraints constraints_;
};

struct RegretResult {
  double value = 0.0;
  bool feasible = true;
};

/// f(x_hat) - f_star for minimization, f_star - f(x_hat) for maximization.
/// Infeasible inputs (beyond `feas_tol`) still yield a value, flagged.
RegretResult regret(const ParametricProblem& problem, const Vector& x_hat, const Vector& zeta,
                    double f_star, double feas_tol = 1e-6);

struct PercentRegret {
  double value = 0.0;
  /// |f_star| was too small to normalize; value is the absolute regret.
  bool absolute = false;
};

PercentRegret percentage_regret(double regret_value, double f_star);

}  // namespace ltof::problems
