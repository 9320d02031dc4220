#include "ltof/problems/problem.hpp"

#include <algorithm>
#include <cmath>

namespace ltof::problems {

Vector ParametricProblem::ineq_residual(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != n()) throw ShapeError("ineq_residual: dimension mismatch");
  return constraints_.G * x - constraints_.h;
}

Vector ParametricProblem::eq_residual(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != n()) throw ShapeError("eq_residual: dimension mismatch");
  return constraints_.A * x - constraints_.b;
}

namespace {

ad::NodeId affine_node(ad::Tape& tape, ad::NodeId x, const Matrix& M, const Vector& rhs) {
  const std::size_t batch = tape.value(x).rows();
  if (M.rows() == 0) return tape.constant(Tensor::matrix(batch, 0));
  auto w = tape.constant(Tensor::from_eigen(M));
  Tensor neg = Tensor({static_cast<std::size_t>(rhs.size())});
  for (Eigen::Index i = 0; i < rhs.size(); ++i) neg[static_cast<std::size_t>(i)] = -rhs(i);
  return tape.linear(x, w, tape.constant(std::move(neg)));
}

}  // namespace

ad::NodeId ParametricProblem::ineq_node(ad::Tape& tape, ad::NodeId x) const {
  return affine_node(tape, x, constraints_.G, constraints_.h);
}

ad::NodeId ParametricProblem::eq_node(ad::Tape& tape, ad::NodeId x) const {
  return affine_node(tape, x, constraints_.A, constraints_.b);
}

double ParametricProblem::violation(const Vector& x) const {
  const std::size_t total = n_eq() + n_ineq();
  if (total == 0) return 0.0;
  const double ineq = ineq_residual(x).cwiseMax(0.0).sum();
  const double eq = eq_residual(x).cwiseAbs().sum();
  return (ineq + eq) / static_cast<double>(total);
}

double ParametricProblem::max_violation(const Vector& x) const {
  double worst = 0.0;
  if (n_ineq() > 0) worst = std::max(worst, ineq_residual(x).maxCoeff());
  if (n_eq() > 0) worst = std::max(worst, eq_residual(x).cwiseAbs().maxCoeff());
  return worst;
}

RegretResult regret(const ParametricProblem& problem, const Vector& x_hat, const Vector& zeta,
                    double f_star, double feas_tol) {
  const double f = problem.objective(x_hat, zeta);
  RegretResult r;
  r.value = problem.sense() == Sense::kMinimize ? f - f_star : f_star - f;
  r.feasible = problem.max_violation(x_hat) <= feas_tol;
  return r;
}

PercentRegret percentage_regret(double regret_value, double f_star) {
  if (std::abs(f_star) < 1e-12) return {regret_value, true};
  return {100.0 * regret_value / std::abs(f_star), false};
}

}  // namespace ltof::problems
