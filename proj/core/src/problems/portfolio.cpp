#include "ltof/problems/portfolio.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ltof::problems {

namespace {

LinearConstraints simplex_constraints(std::size_t d) {
  LinearConstraints c;
  const auto n = static_cast<Eigen::Index>(d);
  c.A = Matrix::Ones(1, n);
  c.b = Vector::Ones(1);
  c.G = -Matrix::Identity(n, n);
  c.h = Vector::Zero(n);
  return c;
}

void check_dims(const Vector& x, const Vector& zeta, std::size_t n) {
  if (static_cast<std::size_t>(x.size()) != n || static_cast<std::size_t>(zeta.size()) != n) {
    throw ShapeError("portfolio: expected x and zeta of length " + std::to_string(n) + ", got " +
                     std::to_string(x.size()) + " and " + std::to_string(zeta.size()));
  }
}

// Shape of the synthetic market. Asset drifts keep the optimal value away from
// zero so percentage regret is well defined.
constexpr double kDriftLow = 0.5;
constexpr double kDriftHigh = 1.5;
constexpr double kLoadingScale = 0.15;
constexpr double kIdioStdLow = 0.1;
constexpr double kIdioStdHigh = 0.3;

}  // namespace

PortfolioProblem::PortfolioProblem(Matrix sigma, double risk_weight)
    : ParametricProblem(simplex_constraints(static_cast<std::size_t>(sigma.rows()))),
      sigma_(std::move(sigma)),
      risk_weight_(risk_weight) {
  if (sigma_.rows() != sigma_.cols()) throw ShapeError("portfolio covariance must be square");
  if ((sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("portfolio covariance must be symmetric");
  }
  if (risk_weight_ < 0.0) throw std::invalid_argument("risk weight must be nonnegative");
}

double PortfolioProblem::objective(const Vector& x, const Vector& zeta) const {
  check_dims(x, zeta, n());
  return zeta.dot(x) - risk_weight_ * x.dot(sigma_ * x);
}

Vector PortfolioProblem::grad_x(const Vector& x, const Vector& zeta) const {
  check_dims(x, zeta, n());
  return zeta - 2.0 * risk_weight_ * (sigma_ * x);
}

Vector PortfolioProblem::grad_zeta(const Vector& x, const Vector& zeta) const {
  check_dims(x, zeta, n());
  return x;
}

ad::NodeId PortfolioProblem::objective_node(ad::Tape& tape, ad::NodeId x, ad::NodeId zeta) const {
  auto ret = tape.row_sum(tape.mul(x, zeta));
  auto sigma = tape.constant(Tensor::from_eigen(sigma_));
  auto risk = tape.row_sum(tape.mul(x, tape.matmul(x, sigma)));
  return tape.sub(ret, tape.scale(risk, risk_weight_));
}

PortfolioData generate_portfolio_data(const PortfolioDataConfig& cfg) {
  if (cfg.factors == 0 || cfg.factors > cfg.assets) {
    throw std::invalid_argument("portfolio data: need 1 <= factors <= assets");
  }
  if (cfg.periods == 0 || cfg.samples == 0) throw std::invalid_argument("portfolio data: empty series");
  const auto d = static_cast<Eigen::Index>(cfg.assets);
  const auto l = static_cast<Eigen::Index>(cfg.factors);
  const auto t_len = static_cast<Eigen::Index>(cfg.periods);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> drift(kDriftLow, kDriftHigh);
  std::uniform_real_distribution<double> idio(kIdioStdLow, kIdioStdHigh);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix loadings(d, l);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < l; ++j) loadings(i, j) = kLoadingScale * unit(rng);
  }
  Vector mean(d);
  Vector idio_std(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    mean(i) = drift(rng);
    idio_std(i) = idio(rng);
  }

  const double phi = cfg.persistence;
  const double innovation = std::sqrt(std::max(0.0, 1.0 - phi * phi));
  Matrix factors(t_len, l);
  Vector f(l);
  for (Eigen::Index j = 0; j < l; ++j) f(j) = normal(rng);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    for (Eigen::Index j = 0; j < l; ++j) f(j) = phi * f(j) + innovation * normal(rng);
    factors.row(t) = f.transpose();
  }

  RowMatrix base(t_len, d);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    Vector r = mean + loadings * factors.row(t).transpose();
    for (Eigen::Index i = 0; i < d; ++i) r(i) += idio_std(i) * normal(rng);
    base.row(t) = r.transpose();
  }

  Eigen::RowVectorXd f_mean = factors.colwise().mean();
  Matrix centered = factors.rowwise() - f_mean;
  const double denom = t_len > 1 ? static_cast<double>(t_len - 1) : 1.0;
  Matrix sigma_f = (centered.transpose() * centered) / denom;
  Matrix sigma = loadings * sigma_f * loadings.transpose();
  sigma.diagonal() += idio_std.array().square().matrix();
  sigma = 0.5 * (sigma + sigma.transpose());

  PortfolioData data;
  data.problem = std::make_shared<PortfolioProblem>(std::move(sigma), cfg.risk_weight);
  data.base_returns = std::move(base);
  data.zetas.resize(static_cast<Eigen::Index>(cfg.samples), d);
  for (std::size_t s = 0; s < cfg.samples; ++s) {
    const auto row = static_cast<Eigen::Index>(s % cfg.periods);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double eps = cfg.noise_std * normal(rng);
      data.zetas(static_cast<Eigen::Index>(s), i) = cfg.alpha * (data.base_returns(row, i) + eps);
    }
  }
  return data;
}

}  // namespace ltof::problems
