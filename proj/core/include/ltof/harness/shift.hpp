#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltof/config.hpp"
#include "ltof/problems/problem.hpp"
#include "ltof/solvers/oracles.hpp"
#include "ltof/trainers/trainers.hpp"

namespace ltof::harness {

struct ShiftPoint {
  double shift = 0.0;
  double regret_mean = 0.0;
  double regret_pct_mean = 0.0;
  double violation_pre = 0.0;
};

/// Evaluates an LtO proxy (input zeta) on base_zeta + s * sigma * direction
/// for each s; f* of every shifted sample comes from the oracle. Points are
/// returned in input order, unsmoothed.
std::vector<ShiftPoint> shift_sweep(const problems::ParametricProblem& problem, const trainers::Proxy& proxy,
                                    const RowMatrix& base_zeta, const Vector& direction, double sigma,
                                    const std::vector<double>& magnitudes,
                                    const solvers::OracleOptions& oracle = {});

/// shift,regret_mean,regret_pct_mean,violation_pre
std::string shift_csv(const std::vector<ShiftPoint>& points);

struct ShiftRun {
  trainers::Proxy proxy;
  trainers::TrainHistory history;
  /// Per-coordinate standard deviation of the uniform training box.
  double sigma = 0.0;
  Vector direction;
  std::vector<ShiftPoint> curve;
};

/// Trains the [shift] method on Toy2D with zeta ~ U[low, high]^2 and sweeps
/// along the normalized [shift] direction.
ShiftRun run_toy2d_shift(const RunConfig& config, std::uint64_t seed);

}  // namespace ltof::harness
