#pragma once

#include <cstdint>
#include <memory>

#include "ltof/problems/problem.hpp"

namespace ltof::problems {

/// Markowitz allocation: maximize zeta^T x - risk_weight * x^T Sigma x over
/// the probability simplex.
class PortfolioProblem final : public ParametricProblem {
 public:
  PortfolioProblem(Matrix sigma, double risk_weight);

  std::string id() const override { return "portfolio"; }
  std::size_t n() const override { return static_cast<std::size_t>(sigma_.rows()); }
  std::size_t param_dim() const override { return n(); }
  Sense sense() const override { return Sense::kMaximize; }
  Restoration restoration() const override { return Restoration::kClipNormalize; }

  double objective(const Vector& x, const Vector& zeta) const override;
  Vector grad_x(const Vector& x, const Vector& zeta) const override;
  Vector grad_zeta(const Vector& x, const Vector& zeta) const override;
  ad::NodeId objective_node(ad::Tape& tape, ad::NodeId x, ad::NodeId zeta) const override;

  const Matrix& sigma() const { return sigma_; }
  double risk_weight() const { return risk_weight_; }

 private:
  Matrix sigma_;
  double risk_weight_;
};

struct PortfolioDataConfig {
  std::size_t assets = 20;
  std::size_t factors = 5;
  std::size_t samples = 3000;
  /// Length of the base return series that samples cycle over.
  std::size_t periods = 1260;
  double persistence = 0.9;
  double noise_std = 0.1;
  double alpha = 0.24;
  double risk_weight = 2.0;
  std::uint64_t seed = 0;
};

struct PortfolioData {
  std::shared_ptr<PortfolioProblem> problem;
  /// samples x assets; row i is alpha * (base[i mod periods] + eps_i).
  RowMatrix zetas;
  /// periods x assets synthetic base returns.
  RowMatrix base_returns;
};

/// Factor-model covariance Sigma = F Sigma_F F^T + D_idio, with an AR(1)
/// factor process driving the base return series.
PortfolioData generate_portfolio_data(const PortfolioDataConfig& config);

}  // namespace ltof::problems
