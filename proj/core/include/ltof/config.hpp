#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ltof/trainers/trainers.hpp"

namespace ltof {

/// Parsed `key = value` entries of a TOML-like document, keyed by
/// "section.key". Values keep their source text.
struct ConfigDocument {
  std::map<std::string, std::string> values;

  /// Accepts [section] headers, `key = value` lines, # comments, numbers,
  /// booleans, double-quoted strings and flat [a, b] lists.
  static ConfigDocument parse(const std::string& text);
};

struct ProblemConfig {
  std::string id = "portfolio";
  std::uint64_t seed = 0;
  /// 0 selects the per-problem default (3000 portfolio, 2000 nonconvex QP, 2000 toy2d).
  std::size_t samples = 0;
  double train_ratio = 0.9;
  // portfolio
  std::size_t assets = 20;
  std::size_t factors = 5;
  std::size_t periods = 1260;
  double persistence = 0.9;
  double noise_std = 0.1;
  double alpha = 0.24;
  double risk_weight = 2.0;
  // nonconvex QP
  std::size_t n = 20;
  std::size_t n_eq = 10;
  std::size_t n_ineq = 10;
  double param_low = -1.0;
  double param_high = 1.0;
  // oracle
  int oracle_restarts = 8;
  double oracle_tol = 1e-8;
};

struct FeaturesConfig {
  std::vector<std::size_t> k = {1, 2, 4, 8};
  /// 0 selects 30 (portfolio), 50 (nonconvex QP) or 2 (toy2d).
  std::size_t width = 0;
  std::size_t hidden = 50;
  std::uint64_t seed = 7;
};

struct ExperimentConfig {
  /// Empty selects the per-problem default list.
  std::vector<std::string> methods;
  std::size_t seeds = 5;
  /// First seed; seeds run seed, seed + 1, ...
  std::uint64_t seed = 0;
  std::string out = "runs";
  std::size_t jobs = 1;
  bool measure_timing = false;
  std::size_t timing_samples = 50;
  /// LtO method used for the frozen proxy of epo-proxy.
  std::string epo_proxy_method = "pdl";
};

struct ShiftConfig {
  std::vector<double> magnitudes = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  std::size_t train_samples = 2000;
  std::size_t test_samples = 500;
  double low = 1.0;
  double high = 2.0;
  std::string method = "pdl";
  /// Shift direction in parameter space; normalized before use.
  std::vector<double> direction = {-1.0, -1.0};
};

struct RunConfig {
  ProblemConfig problem;
  FeaturesConfig features;
  trainers::ModelOptions model;
  trainers::TrainOptions train;
  trainers::MethodOptions methods;
  /// DC3 on the portfolio problem treats 1^T x = 1 as the single equality.
  bool dc3_eq_mode = false;
  std::vector<std::size_t> two_stage_layers = {1, 2, 4, 8};
  ExperimentConfig experiment;
  ShiftConfig shift;

  /// Desk-scale defaults: width 128, lr 1e-3, 100 epochs, patience 30.
  RunConfig();

  static RunConfig from_document(const ConfigDocument& doc);
  static RunConfig load(const std::string& path);

  /// D=50, N=12000 portfolio; n=50 nonconvex QP; width 500, lr 1e-4, 300 epochs.
  void apply_paper_scale();
  /// Fills per-problem defaults and checks ranges; throws ConfigError.
  void resolve();

  std::size_t feature_width() const;
  std::vector<trainers::Method> method_list() const;
  std::vector<std::uint64_t> seed_list() const;

  /// Every key with its resolved value; parses back to the same config.
  std::string to_toml() const;
};

}  // namespace ltof
