#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltof/problems/problem.hpp"
#include "ltof/solvers/oracles.hpp"
#include "ltof/trainers/proxy.hpp"

namespace ltof::harness {

/// One result row. Regrets are measured after restoration unless noted.
struct EvalReport {
  std::string method;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double regret_mean = 0.0;
  double regret_pct_mean = 0.0;
  double violation_pre = 0.0;
  double violation_post = 0.0;
  double it_ms = 0.0;
  double fct_ms = 0.0;
  double et_ms = 0.0;
  std::size_t epochs = 0;
  std::size_t early_stop_epoch = 0;
  /// Percentage regret of the raw, unrestored decisions.
  double regret_pct_pre_mean = 0.0;
  /// 90th percentile of the per-sample regret.
  double regret_p90 = 0.0;
  /// Samples whose |f*| was too small for a percentage; counted as absolute.
  std::size_t absolute_pct_samples = 0;
};

/// method,k,seed,regret_mean,regret_pct_mean,violation_pre,violation_post,
/// it_ms,fct_ms,et_ms,epochs,early_stop_epoch,regret_pct_pre_mean,regret_p90
std::vector<std::string> result_header();
std::vector<std::string> result_row(const EvalReport& report);
/// `seed_text` replaces the seed column (aggregate rows use "mean").
std::vector<std::string> result_row(const EvalReport& report, const std::string& seed_text);
EvalReport parse_result_row(const std::vector<std::string>& header, const std::vector<std::string>& row);

struct EvalOptions {
  /// Wall-clock medians of it/fct/et over the first `timing_samples` test
  /// rows, at batch size 1. Off leaves the timing columns at 0.
  bool measure_timing = false;
  std::size_t timing_samples = 50;
};

/// Test inputs: z (model input), zeta (true parameters) and f*(zeta).
struct EvalSplit {
  const RowMatrix& z;
  const RowMatrix& zeta;
  const std::vector<double>& fstar;
};

/// Regret, violation and percentile statistics of raw decisions x_hat,
/// restored with the problem's strategy.
EvalReport score(const problems::ParametricProblem& problem, const RowMatrix& x_hat, const RowMatrix& zeta,
                 const std::vector<double>& fstar);

/// LtOF or LtO proxy: x_hat = proxy(z), then restoration.
EvalReport evaluate_proxy(const problems::ParametricProblem& problem, const trainers::Proxy& proxy,
                          const EvalSplit& split, const EvalOptions& options = {});

/// Two-stage: zeta_hat = predictor(z), x = oracle(zeta_hat).
EvalReport evaluate_two_stage(const problems::ParametricProblem& problem, const trainers::Proxy& predictor,
                              const solvers::OracleOptions& oracle, const EvalSplit& split,
                              const EvalOptions& options = {});

/// Frozen-proxy EPO: x_hat = frozen(predictor(z)), then restoration.
EvalReport evaluate_epo(const problems::ParametricProblem& problem, const trainers::Proxy& predictor,
                        const trainers::Proxy& frozen, const EvalSplit& split, const EvalOptions& options = {});

/// The oracle on the true parameters; regret against the cache.
EvalReport evaluate_oracle(const problems::ParametricProblem& problem, const solvers::OracleOptions& oracle,
                           const EvalSplit& split, const EvalOptions& options = {});

/// Median of the values (mean of the middle pair for even counts).
double median(std::vector<double> values);
/// Nearest-rank percentile, q in [0, 1].
double percentile(std::vector<double> values, double q);

}  // namespace ltof::harness
