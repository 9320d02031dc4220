#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltof/autodiff/mlp.hpp"
#include "ltof/autodiff/tape.hpp"
#include "ltof/problems/problem.hpp"

namespace ltof::trainers {

/// Column-wise affine map (x - mean) / scale and its inverse.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer identity(std::size_t dim);
  /// Columns with (near) zero spread keep scale 1.
  static Standardizer fit(const RowMatrix& data);

  bool empty() const { return mean.size() == 0; }
  RowMatrix apply(const RowMatrix& x) const;
  RowMatrix invert(const RowMatrix& y) const;

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& doc);
};

/// Per-step diagnostics of the inequality correction.
struct CorrectionTrace {
  /// Largest per-row change of ||[G x - h]_+||^2 at each step (<= 0 expected).
  std::vector<double> max_increase;
  /// Largest ||A x - b||_inf seen after completion, over all steps.
  double eq_residual = 0.0;
};

/// Equality completion x_c = A_c^{-1} (b - A_p x_p) over a column partition
/// picked by pivoted QR, plus gradient correction of inequality violation in
/// the reduced space.
class Dc3Completion {
 public:
  explicit Dc3Completion(const problems::LinearConstraints& constraints);

  const std::vector<std::size_t>& predicted() const { return predicted_; }
  const std::vector<std::size_t>& completed() const { return completed_; }
  std::size_t n() const { return n_; }
  std::size_t n_partial() const { return predicted_.size(); }
  double condition_number() const { return condition_; }

  RowMatrix complete(const RowMatrix& x_partial) const;
  ad::NodeId complete(ad::Tape& tape, ad::NodeId x_partial) const;

  /// `steps` gradient steps on ||[G x - h]_+||^2 in the predicted
  /// coordinates. Each row starts at `gamma` and halves its step until the
  /// violation does not increase (step 0 after 40 halvings).
  RowMatrix correct(const RowMatrix& x_partial, int steps, double gamma,
                    CorrectionTrace* trace = nullptr) const;
  /// Same steps recorded on the tape; the per-row step sizes are chosen from
  /// the current values and enter as constants.
  ad::NodeId correct(ad::Tape& tape, ad::NodeId x_partial, int steps, double gamma,
                     CorrectionTrace* trace = nullptr) const;

  /// Squared inequality violation per row, in reduced coordinates.
  Vector row_violation(const RowMatrix& x_partial) const;

 private:
  Eigen::VectorXd step_sizes(const RowMatrix& x_partial, const RowMatrix& direction, double gamma,
                             double* max_increase) const;

  problems::LinearConstraints constraints_;
  std::size_t n_;
  std::vector<std::size_t> predicted_;
  std::vector<std::size_t> completed_;
  double condition_ = 1.0;
  Matrix complete_w_;  // n_eq x n_p: -A_c^{-1} A_p
  Vector complete_b_;  // A_c^{-1} b
  Matrix g_eff_;       // n_ineq x n_p: d(G x)/d x_p
  Vector h_eff_;       // h - G_c A_c^{-1} b
};

/// Trained network plus the fixed maps around it: input standardization,
/// output de-standardization and, for DC3, completion and correction.
struct Proxy {
  ad::MlpModel net;
  Standardizer input;
  Standardizer output;
  std::shared_ptr<const Dc3Completion> dc3;
  int correction_steps = 0;
  double correction_gamma = 0.0;

  /// Inference-mode output for each row of `raw_input`, before restoration.
  RowMatrix predict(const RowMatrix& raw_input, CorrectionTrace* trace = nullptr) const;

  nlohmann::json to_json() const;
  /// DC3 proxies need the constraints to rebuild the completion.
  static Proxy from_json(const nlohmann::json& doc, const problems::LinearConstraints* constraints);
};

void save_proxy(const Proxy& proxy, const std::string& path);
Proxy load_proxy(const std::string& path, const problems::LinearConstraints* constraints);

}  // namespace ltof::trainers
