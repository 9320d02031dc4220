#include "ltof/solvers/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ltof::solvers {

namespace {

constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kInfeasEps = 1e-7;
constexpr double kPolishDelta = 1e-10;
constexpr int kPolishRefine = 3;
// Polishing is attempted once the ADMM primal residual drops below this.
constexpr double kPolishTrigger = 1e-3;

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double feasibility_residual(const Matrix& A, const Vector& b, const Matrix& G, const Vector& h,
                            const Vector& x) {
  double r = 0.0;
  if (A.rows() > 0) r = std::max(r, inf_norm(A * x - b));
  if (G.rows() > 0) r = std::max(r, (G * x - h).cwiseMax(0.0).maxCoeff());
  return r;
}

}  // namespace

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kConverged: return "converged";
    case QpStatus::kMaxIter: return "max_iter";
    case QpStatus::kPrimalInfeasible: return "primal_infeasible";
    case QpStatus::kDualInfeasible: return "dual_infeasible";
  }
  return "unknown";
}

QpWorkspace::QpWorkspace(Matrix P, Matrix A, Matrix G, QpSettings settings)
    : P_(std::move(P)), A_(std::move(A)), G_(std::move(G)), settings_(settings), rho_(settings.rho) {
  const Eigen::Index n = P_.rows();
  if (P_.cols() != n) throw ShapeError("qp: P must be square");
  if (A_.rows() == 0) A_.resize(0, n);
  if (G_.rows() == 0) G_.resize(0, n);
  if (A_.cols() != n || G_.cols() != n) throw ShapeError("qp: constraint width differs from P");
  C_.resize(A_.rows() + G_.rows(), n);
  C_ << A_, G_;
  factorize();
}

void QpWorkspace::factorize() {
  const Eigen::Index m_eq = A_.rows();
  rho_vec_.resize(C_.rows());
  for (Eigen::Index i = 0; i < C_.rows(); ++i) {
    rho_vec_(i) = i < m_eq ? rho_ * settings_.eq_rho_scale : rho_;
  }
  Matrix K = P_;
  K.diagonal().array() += settings_.sigma;
  K.noalias() += C_.transpose() * rho_vec_.asDiagonal() * C_;
  llt_.compute(K);
  if (llt_.info() != Eigen::Success) throw std::runtime_error("qp: KKT factorization failed (P not PSD?)");
}

void QpWorkspace::reset_warm_start() {
  x_.resize(0);
  z_.resize(0);
  y_.resize(0);
}

QpSolution QpWorkspace::solve(const Vector& q, const Vector& b, const Vector& h) {
  const Eigen::Index n = P_.rows();
  const Eigen::Index m_eq = A_.rows();
  const Eigen::Index m = C_.rows();
  if (q.size() != n || b.size() != m_eq || h.size() != G_.rows()) {
    throw ShapeError("qp: q, b or h has the wrong length");
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Vector lower(m);
  Vector upper(m);
  lower << b, Vector::Constant(G_.rows(), -kInf);
  upper << b, h;

  if (x_.size() != n || z_.size() != m || y_.size() != m) {
    x_ = Vector::Zero(n);
    z_ = (C_ * x_).cwiseMax(lower).cwiseMin(upper);
    y_ = Vector::Zero(m);
  }
  Vector x = x_;
  Vector z = z_;
  Vector y = y_;
  const double alpha = settings_.relaxation;

  QpSolution sol;
  sol.status = QpStatus::kMaxIter;
  for (int iter = 1; iter <= settings_.max_iter; ++iter) {
    Vector rhs = settings_.sigma * x - q + C_.transpose() * (rho_vec_.cwiseProduct(z) - y);
    Vector x_tilde = llt_.solve(rhs);
    Vector z_tilde = C_ * x_tilde;
    Vector x_next = alpha * x_tilde + (1.0 - alpha) * x;
    Vector z_relax = alpha * z_tilde + (1.0 - alpha) * z;
    Vector z_next = (z_relax + y.cwiseQuotient(rho_vec_)).cwiseMax(lower).cwiseMin(upper);
    Vector y_next = y + rho_vec_.cwiseProduct(z_relax - z_next);
    Vector dx = x_next - x;
    Vector dy = y_next - y;
    x = std::move(x_next);
    z = std::move(z_next);
    y = std::move(y_next);
    sol.iterations = iter;

    const bool check = iter % settings_.check_interval == 0 || iter == settings_.max_iter;
    const bool adapt = settings_.adapt_interval > 0 && iter % settings_.adapt_interval == 0;
    if (!check && !adapt) continue;

    Vector Px = P_ * x;
    Vector Cty = C_.transpose() * y;
    Vector Cx = C_ * x;
    const double r_admm = inf_norm(Cx - z);
    const double r_prim = feasibility_residual(A_, b, G_, h, x);
    const double r_dual = inf_norm(Px + q + Cty);

    if (check) {
      sol.primal_residual = r_prim;
      sol.dual_residual = r_dual;
      if (r_prim <= settings_.tol && r_dual <= settings_.tol) {
        sol.status = QpStatus::kConverged;
        break;
      }
      if (settings_.polish && r_admm < kPolishTrigger) {
        QpSolution trial = sol;
        trial.x = x;
        trial.lambda_eq = y.head(m_eq);
        trial.lambda_ineq = y.tail(G_.rows());
        x_ = x;
        z_ = z;
        y_ = y;
        if (try_polish(q, b, h, trial)) {
          trial.status = QpStatus::kConverged;
          return trial;
        }
      }
      const double dy_norm = inf_norm(dy);
      if (dy_norm > 0.0) {
        const double eps = kInfeasEps * dy_norm;
        double support = 0.0;
        bool sign_ok = true;
        for (Eigen::Index i = 0; i < m; ++i) {
          if (i < m_eq) {
            support += b(i) * dy(i);
          } else {
            if (dy(i) < -eps) sign_ok = false;
            support += h(i - m_eq) * std::max(dy(i), 0.0);
          }
        }
        if (sign_ok && inf_norm(C_.transpose() * dy) <= eps && support < -eps) {
          sol.status = QpStatus::kPrimalInfeasible;
          break;
        }
      }
      const double dx_norm = inf_norm(dx);
      if (dx_norm > 0.0) {
        const double eps = kInfeasEps * dx_norm;
        Vector Cdx = C_ * dx;
        bool cone_ok = true;
        for (Eigen::Index i = 0; i < m; ++i) {
          if (i < m_eq ? std::abs(Cdx(i)) > eps : Cdx(i) > eps) cone_ok = false;
        }
        if (cone_ok && inf_norm(P_ * dx) <= eps && q.dot(dx) < -eps) {
          sol.status = QpStatus::kDualInfeasible;
          break;
        }
      }
    }

    if (adapt) {
      const double prim_scale = std::max({inf_norm(Cx), inf_norm(z), 1e-12});
      const double dual_scale = std::max({inf_norm(Px), inf_norm(Cty), inf_norm(q), 1e-12});
      const double num = r_admm / prim_scale;
      const double den = std::max(r_dual / dual_scale, 1e-30);
      const double candidate = std::clamp(rho_ * std::sqrt(num / den), kRhoMin, kRhoMax);
      if (candidate > 5.0 * rho_ || candidate < 0.2 * rho_) {
        rho_ = candidate;
        factorize();
      }
    }
  }

  x_ = x;
  z_ = z;
  y_ = y;
  sol.x = x;
  sol.lambda_eq = y.head(m_eq);
  sol.lambda_ineq = y.tail(G_.rows());
  if (settings_.polish && (sol.status == QpStatus::kConverged || sol.status == QpStatus::kMaxIter)) {
    QpSolution trial = sol;
    if (try_polish(q, b, h, trial)) {
      trial.status = QpStatus::kConverged;
      return trial;
    }
  }
  return sol;
}

bool QpWorkspace::try_polish(const Vector& q, const Vector& b, const Vector& h, QpSolution& sol) const {
  const Eigen::Index n = P_.rows();
  const Eigen::Index m_eq = A_.rows();
  const Eigen::Index m_in = G_.rows();

  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < m_in; ++i) {
    const double gap = h(i) - z_(m_eq + i);
    if (gap < y_(m_eq + i)) active.push_back(i);
  }
  const auto k = static_cast<Eigen::Index>(active.size());
  const Eigen::Index dim = n + m_eq + k;
  Matrix Cact(m_eq + k, n);
  Vector rhs_c(m_eq + k);
  if (m_eq > 0) {
    Cact.topRows(m_eq) = A_;
    rhs_c.head(m_eq) = b;
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    Cact.row(m_eq + j) = G_.row(active[static_cast<std::size_t>(j)]);
    rhs_c(m_eq + j) = h(active[static_cast<std::size_t>(j)]);
  }
  Matrix K = Matrix::Zero(dim, dim);
  K.topLeftCorner(n, n) = P_;
  K.topRightCorner(n, m_eq + k) = Cact.transpose();
  K.bottomLeftCorner(m_eq + k, n) = Cact;
  Matrix K_reg = K;
  K_reg.diagonal().head(n).array() += kPolishDelta;
  K_reg.diagonal().tail(m_eq + k).array() -= kPolishDelta;
  Eigen::PartialPivLU<Matrix> lu(K_reg);
  Vector rhs(dim);
  rhs << -q, rhs_c;
  Vector s = lu.solve(rhs);
  for (int r = 0; r < kPolishRefine; ++r) s += lu.solve(rhs - K * s);
  if (!s.allFinite()) return false;

  Vector x = s.head(n);
  Vector y_eq = s.segment(n, m_eq);
  Vector y_in = Vector::Zero(m_in);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double v = s(n + m_eq + j);
    if (v < -1e-9) return false;
    y_in(active[static_cast<std::size_t>(j)]) = std::max(v, 0.0);
  }
  const double r_prim = feasibility_residual(A_, b, G_, h, x);
  const double r_dual = inf_norm(P_ * x + q + A_.transpose() * y_eq + G_.transpose() * y_in);
  if (r_prim > settings_.tol || r_dual > settings_.tol) return false;

  sol.x = x;
  sol.lambda_eq = y_eq;
  sol.lambda_ineq = y_in;
  sol.primal_residual = r_prim;
  sol.dual_residual = r_dual;
  sol.polished = true;
  return true;
}

QpSolution qp_solve(const Matrix& P, const Vector& q, const Matrix& A, const Vector& b,
                    const Matrix& G, const Vector& h, const QpSettings& settings) {
  QpWorkspace ws(P, A, G, settings);
  return ws.solve(q, b, h);
}

PolytopeProjector::PolytopeProjector(const problems::LinearConstraints& constraints, double tol)
    : constraints_(constraints),
      workspace_(Matrix::Identity(constraints.G.rows() > 0 ? constraints.G.cols() : constraints.A.cols(),
                                  constraints.G.rows() > 0 ? constraints.G.cols() : constraints.A.cols()),
                 constraints.A, constraints.G, QpSettings{.tol = tol}) {}

QpSolution PolytopeProjector::project_detailed(const Vector& x_hat) {
  return workspace_.solve(-x_hat, constraints_.b, constraints_.h);
}

Vector PolytopeProjector::project(const Vector& x_hat) {
  QpSolution sol = project_detailed(x_hat);
  if (sol.status != QpStatus::kConverged) {
    throw std::runtime_error("polytope projection did not converge: " + to_string(sol.status));
  }
  return sol.x;
}

Vector project_polytope(const Vector& x_hat, const Matrix& A, const Vector& b, const Matrix& G,
                        const Vector& h, double tol) {
  const Eigen::Index n = x_hat.size();
  Matrix Aw = A.rows() == 0 ? Matrix(0, n) : A;
  Matrix Gw = G.rows() == 0 ? Matrix(0, n) : G;
  QpSolution sol = qp_solve(Matrix::Identity(n, n), -x_hat, Aw, b, Gw, h, QpSettings{.tol = tol});
  if (sol.status != QpStatus::kConverged) {
    throw std::runtime_error("polytope projection did not converge: " + to_string(sol.status));
  }
  return sol.x;
}

}  // namespace ltof::solvers
