#include "ltof/problems/nonconvex_qp.hpp"

#include <random>
#include <stdexcept>

namespace ltof::problems {

namespace {

void check_dims(const Vector& x, const Vector& zeta, std::size_t n) {
  if (static_cast<std::size_t>(x.size()) != n || static_cast<std::size_t>(zeta.size()) != n) {
    throw ShapeError("nonconvex_qp: expected x and zeta of length " + std::to_string(n) + ", got " +
                     std::to_string(x.size()) + " and " + std::to_string(zeta.size()));
  }
}

}  // namespace

NonconvexQpProblem::NonconvexQpProblem(Matrix Q, LinearConstraints constraints, Vector witness)
    : ParametricProblem(std::move(constraints)), Q_(std::move(Q)), witness_(std::move(witness)) {
  if (Q_.rows() != Q_.cols()) throw ShapeError("Q must be square");
  if (constraints_.A.rows() > 0 && constraints_.A.cols() != Q_.rows()) throw ShapeError("A width");
  if (constraints_.G.rows() > 0 && constraints_.G.cols() != Q_.rows()) throw ShapeError("G width");
  if (constraints_.A.rows() == 0) constraints_.A.resize(0, Q_.rows());
  if (constraints_.G.rows() == 0) constraints_.G.resize(0, Q_.rows());
}

double NonconvexQpProblem::objective(const Vector& x, const Vector& zeta) const {
  check_dims(x, zeta, n());
  return 0.5 * x.dot(Q_ * x) + zeta.dot(x.array().sin().matrix());
}

Vector NonconvexQpProblem::grad_x(const Vector& x, const Vector& zeta) const {
  check_dims(x, zeta, n());
  return Q_ * x + (zeta.array() * x.array().cos()).matrix();
}

Vector NonconvexQpProblem::grad_zeta(const Vector& x, const Vector& zeta) const {
  check_dims(x, zeta, n());
  return x.array().sin().matrix();
}

ad::NodeId NonconvexQpProblem::objective_node(ad::Tape& tape, ad::NodeId x, ad::NodeId zeta) const {
  auto q = tape.constant(Tensor::from_eigen(Q_));
  auto quad = tape.scale(tape.row_sum(tape.mul(x, tape.matmul(x, q))), 0.5);
  auto osc = tape.row_sum(tape.mul(zeta, tape.sin(x)));
  return tape.add(quad, osc);
}

std::shared_ptr<NonconvexQpProblem> generate_nonconvex_instance(std::size_t n, std::size_t n_eq,
                                                                std::size_t n_ineq,
                                                                std::uint64_t seed) {
  if (n == 0 || n_eq >= n) throw std::invalid_argument("nonconvex instance: need n_eq < n");
  const auto nn = static_cast<Eigen::Index>(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::uniform_real_distribution<double> slack(0.0, 1.0);

  Matrix M(nn, nn);
  for (Eigen::Index i = 0; i < nn; ++i) {
    for (Eigen::Index j = 0; j < nn; ++j) M(i, j) = sym(rng);
  }
  Matrix Q = M.transpose() * M / static_cast<double>(n);
  Q = 0.5 * (Q + Q.transpose());

  LinearConstraints c;
  c.A.resize(static_cast<Eigen::Index>(n_eq), nn);
  c.G.resize(static_cast<Eigen::Index>(n_ineq), nn);
  for (Eigen::Index i = 0; i < c.A.rows(); ++i) {
    for (Eigen::Index j = 0; j < nn; ++j) c.A(i, j) = sym(rng);
  }
  for (Eigen::Index i = 0; i < c.G.rows(); ++i) {
    for (Eigen::Index j = 0; j < nn; ++j) c.G(i, j) = sym(rng);
  }
  Vector x0(nn);
  for (Eigen::Index j = 0; j < nn; ++j) x0(j) = sym(rng);
  c.b = c.A * x0;
  c.h = c.G * x0;
  for (Eigen::Index i = 0; i < c.h.size(); ++i) c.h(i) += slack(rng);
  return std::make_shared<NonconvexQpProblem>(std::move(Q), std::move(c), std::move(x0));
}

RowMatrix sample_uniform_params(std::size_t samples, std::size_t dim, double low, double high,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(low, high);
  RowMatrix out(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = dist(rng);
  }
  return out;
}

}  // namespace ltof::problems
