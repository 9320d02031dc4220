#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltof/problems/dataset.hpp"
#include "ltof/problems/problem.hpp"
#include "ltof/solvers/restore.hpp"
#include "ltof/trainers/proxy.hpp"

namespace ltof::trainers {

enum class Method { kLd, kPdl, kDc3, kTwoStage, kEpoProxy };

std::string to_string(Method method);
/// Accepts ld, pdl, dc3, two-stage, epo-proxy; throws ConfigError otherwise.
Method parse_method(const std::string& name);
bool is_ltof(Method method);

enum class StopMetric { kRegretPct, kRegret };

struct ModelOptions {
  std::size_t hidden_width = 500;
  std::size_t hidden_layers = 2;
  double dropout = 0.1;
  bool batchnorm = true;
};

struct TrainOptions {
  std::size_t max_epochs = 300;
  std::size_t batch_size = 200;
  double learning_rate = 1e-4;
  /// Epochs without improvement of the test metric before stopping.
  std::size_t patience = 20;
  StopMetric stop_metric = StopMetric::kRegretPct;
  std::uint64_t seed = 0;
};

struct LdOptions {
  double lambda0 = 0.1;
  double mu0 = 0.5;
  double step_size = 200.0;
  double updating_epochs = 0.001;
  /// Epochs between multiplier updates.
  std::size_t update_period = 5;
  double step() const { return step_size * updating_epochs; }
};

struct PdlOptions {
  double rho0 = 0.5;
  double rho_max = 5000.0;
  double alpha = 5.0;
  double tau = 0.8;
  std::size_t primal_epochs = 10;
  std::size_t dual_epochs = 5;
};

struct Dc3Options {
  double lambda = 7.5;
  double mu = 2.5;
  int t_train = 5;
  int t_test = 5;
  double gamma = 1e-4;
};

struct TwoStageOptions {
  std::size_t layers = 2;
};

struct EpoOptions {
  std::size_t layers = 2;
};

struct MethodOptions {
  LdOptions ld;
  PdlOptions pdl;
  Dc3Options dc3;
  TwoStageOptions two_stage;
  EpoOptions epo;
};

/// Train/test matrices for one (problem, feature map) cell. For LtO the
/// inputs are the parameters themselves.
struct TrainingSet {
  std::shared_ptr<const problems::ParametricProblem> problem;
  RowMatrix z_train;
  RowMatrix zeta_train;
  std::optional<RowMatrix> xstar_train;
  RowMatrix z_test;
  RowMatrix zeta_test;
  std::vector<double> fstar_test;
};

/// Splits by the dataset's labels. `use_zeta_as_input` selects LtO inputs.
TrainingSet make_training_set(std::shared_ptr<const problems::ParametricProblem> problem,
                              const problems::PtoDataset& data, bool use_zeta_as_input = false);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  /// Value the early-stopping rule watches (regret, percentage regret or MSE).
  double test_metric = 0.0;
  double test_regret = 0.0;
  double test_regret_pct = 0.0;
  double violation_pre = 0.0;
  double multiplier_norm = 0.0;
  /// Smallest LD inequality multiplier or PDL target; 0 otherwise.
  double lambda_min = 0.0;
  double rho = 0.0;
  /// Largest DC3 equality residual after completion during the epoch.
  double eq_residual = 0.0;
  /// Largest DC3 per-row violation change across correction steps.
  double correction_increase = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  /// Epoch at which patience ran out; 0 when the epoch budget was used up.
  std::size_t early_stop_epoch = 0;

  std::string to_csv() const;
};

struct TrainResult {
  Proxy proxy;
  TrainHistory history;
};

/// Mean over rows of the restored decisions' regret, percentage regret and
/// violations before and after restoration.
struct DecisionScores {
  double regret_mean = 0.0;
  double regret_pct_mean = 0.0;
  double violation_pre = 0.0;
  double violation_post = 0.0;
  std::vector<double> regrets;
  std::vector<double> regret_pcts;
};

DecisionScores score_decisions(const problems::ParametricProblem& problem, solvers::Restorer& restorer,
                               const RowMatrix& x_hat, const RowMatrix& zeta,
                               const std::vector<double>& fstar);

// Loss and state helpers, evaluated on plain values.

struct LdState {
  Vector lambda;
  Vector mu;
  double step = 0.2;
};

LdState ld_initial_state(const problems::ParametricProblem& problem, const LdOptions& options);
double ld_loss(const RowMatrix& x_hat, const RowMatrix& x_star, const problems::ParametricProblem& problem,
               const LdState& state);
/// lambda += step * mean_ineq_violation, mu += step * mean_eq_residual.
LdState ld_multiplier_update(LdState state, const Vector& mean_ineq_violation,
                             const Vector& mean_eq_residual);

double pdl_primal_loss(const RowMatrix& x_hat, const RowMatrix& zeta, const RowMatrix& lambda_hat,
                       const RowMatrix& mu_hat, double rho, const problems::ParametricProblem& problem);

struct PdlState {
  RowMatrix lambda;  // per training instance, n_ineq columns
  RowMatrix mu;      // per training instance, n_eq columns
  double rho = 0.5;
  double rho_max = 5000.0;
  double alpha = 5.0;
  double tau = 0.8;
  double previous_violation = INFINITY;
};

PdlState pdl_initial_state(const problems::ParametricProblem& problem, std::size_t instances,
                           const PdlOptions& options);
/// Multiplier targets step along the residuals; rho grows by alpha (capped)
/// when the largest violation did not shrink below tau times the previous.
void pdl_outer_update(PdlState& state, const RowMatrix& x_hat, const problems::ParametricProblem& problem);

double dc3_loss(const RowMatrix& x, const RowMatrix& zeta, const problems::ParametricProblem& problem,
                double lambda, double mu);

// Trainers. All are deterministic in options.seed.

TrainResult train_ltof(Method method, const TrainingSet& data, const ModelOptions& model,
                       const TrainOptions& train, const MethodOptions& methods);

/// Classic LtO proxy: the training set's inputs must be the parameters.
TrainResult pretrain_proxy(Method method, const TrainingSet& data, const ModelOptions& model,
                           const TrainOptions& train, const MethodOptions& methods);

/// Predicts zeta from z with MSE loss; stops early on test MSE.
TrainResult train_two_stage(const TrainingSet& data, const ModelOptions& model, const TrainOptions& train,
                            const TwoStageOptions& options);

/// Trains z -> zeta_hat through the frozen proxy on the decision objective.
/// The returned proxy predicts zeta_hat; compose with `frozen` at inference.
TrainResult train_epo_with_frozen_proxy(const TrainingSet& data, const Proxy& frozen,
                                        const ModelOptions& model, const TrainOptions& train,
                                        const EpoOptions& options);

/// x_hat = frozen(predictor(z)), before restoration.
RowMatrix epo_predict(const Proxy& predictor, const Proxy& frozen, const RowMatrix& z);

}  // namespace ltof::trainers
