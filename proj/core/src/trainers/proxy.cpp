#include "ltof/trainers/proxy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ltof/io.hpp"

namespace ltof::trainers {

namespace {

constexpr int kMaxHalvings = 40;

Tensor col_tensor(const Vector& v) {
  Tensor t = Tensor::matrix(static_cast<std::size_t>(v.size()), 1);
  for (Eigen::Index i = 0; i < v.size(); ++i) t[static_cast<std::size_t>(i)] = v(i);
  return t;
}

}  // namespace

Standardizer Standardizer::identity(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {Eigen::RowVectorXd::Zero(d), Eigen::RowVectorXd::Ones(d)};
}

Standardizer Standardizer::fit(const RowMatrix& data) {
  if (data.rows() == 0) throw ShapeError("cannot fit a standardizer on zero rows");
  Standardizer s;
  const auto rows = static_cast<double>(data.rows());
  s.mean = data.colwise().sum() / rows;
  s.scale = ((data.rowwise() - s.mean).array().square().colwise().sum() / rows).sqrt().matrix();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
    if (!(s.scale(j) > 1e-12)) s.scale(j) = 1.0;
  }
  return s;
}

RowMatrix Standardizer::apply(const RowMatrix& x) const {
  if (empty()) return x;
  if (x.cols() != mean.size()) throw ShapeError("standardizer width mismatch");
  RowMatrix out = x.rowwise() - mean;
  out.array().rowwise() /= scale.array();
  return out;
}

RowMatrix Standardizer::invert(const RowMatrix& y) const {
  if (empty()) return y;
  if (y.cols() != mean.size()) throw ShapeError("standardizer width mismatch");
  RowMatrix out = y;
  out.array().rowwise() *= scale.array();
  out.rowwise() += mean;
  return out;
}

nlohmann::json Standardizer::to_json() const {
  return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
          {"scale", std::vector<double>(scale.data(), scale.data() + scale.size())}};
}

Standardizer Standardizer::from_json(const nlohmann::json& doc) {
  const auto m = doc.at("mean").get<std::vector<double>>();
  const auto s = doc.at("scale").get<std::vector<double>>();
  if (m.size() != s.size()) throw IoError("standardizer mean/scale length mismatch");
  Standardizer out;
  out.mean = Eigen::Map<const Eigen::RowVectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
  out.scale = Eigen::Map<const Eigen::RowVectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
  return out;
}

Dc3Completion::Dc3Completion(const problems::LinearConstraints& constraints)
    : constraints_(constraints) {
  const Matrix& A = constraints.A;
  const Matrix& G = constraints.G;
  n_ = static_cast<std::size_t>(std::max(A.cols(), G.cols()));
  const Eigen::Index m_eq = A.rows();
  if (m_eq == 0) {
    for (std::size_t i = 0; i < n_; ++i) predicted_.push_back(i);
  } else {
    if (static_cast<std::size_t>(m_eq) >= n_) {
      throw std::invalid_argument("completion needs fewer equalities than variables");
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(A);
    if (qr.rank() < m_eq) throw std::invalid_argument("equality matrix is rank deficient");
    const auto& perm = qr.colsPermutation().indices();
    std::vector<bool> is_completed(n_, false);
    for (Eigen::Index j = 0; j < m_eq; ++j) is_completed[static_cast<std::size_t>(perm(j))] = true;
    for (std::size_t i = 0; i < n_; ++i) (is_completed[i] ? completed_ : predicted_).push_back(i);
  }

  const auto n_p = static_cast<Eigen::Index>(predicted_.size());
  Matrix A_p(m_eq, n_p);
  Matrix A_c(m_eq, m_eq);
  for (Eigen::Index j = 0; j < n_p; ++j) A_p.col(j) = A.col(static_cast<Eigen::Index>(predicted_[static_cast<std::size_t>(j)]));
  for (Eigen::Index j = 0; j < m_eq; ++j) A_c.col(j) = A.col(static_cast<Eigen::Index>(completed_[static_cast<std::size_t>(j)]));
  if (m_eq > 0) {
    Eigen::JacobiSVD<Matrix> svd(A_c);
    const auto& sv = svd.singularValues();
    condition_ = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
    Eigen::FullPivLU<Matrix> lu(A_c);
    if (!lu.isInvertible()) throw std::invalid_argument("completion block is singular");
    complete_w_ = -lu.solve(A_p);
    complete_b_ = lu.solve(constraints.b);
  } else {
    complete_w_.resize(0, n_p);
    complete_b_.resize(0);
  }

  const Eigen::Index m_in = G.rows();
  g_eff_ = Matrix::Zero(m_in, n_p);
  h_eff_ = m_in > 0 ? Vector(constraints.h) : Vector(0);
  if (m_in > 0) {
    Matrix G_c(m_in, m_eq);
    for (Eigen::Index j = 0; j < n_p; ++j) g_eff_.col(j) = G.col(static_cast<Eigen::Index>(predicted_[static_cast<std::size_t>(j)]));
    for (Eigen::Index j = 0; j < m_eq; ++j) G_c.col(j) = G.col(static_cast<Eigen::Index>(completed_[static_cast<std::size_t>(j)]));
    if (m_eq > 0) {
      g_eff_ += G_c * complete_w_;
      h_eff_ -= G_c * complete_b_;
    }
  }
}

RowMatrix Dc3Completion::complete(const RowMatrix& x_partial) const {
  if (static_cast<std::size_t>(x_partial.cols()) != predicted_.size()) {
    throw ShapeError("completion: partial width mismatch");
  }
  RowMatrix x(x_partial.rows(), static_cast<Eigen::Index>(n_));
  for (std::size_t j = 0; j < predicted_.size(); ++j) {
    x.col(static_cast<Eigen::Index>(predicted_[j])) = x_partial.col(static_cast<Eigen::Index>(j));
  }
  if (!completed_.empty()) {
    RowMatrix xc = x_partial * complete_w_.transpose();
    xc.rowwise() += complete_b_.transpose();
    for (std::size_t j = 0; j < completed_.size(); ++j) {
      x.col(static_cast<Eigen::Index>(completed_[j])) = xc.col(static_cast<Eigen::Index>(j));
    }
  }
  return x;
}

ad::NodeId Dc3Completion::complete(ad::Tape& tape, ad::NodeId x_partial) const {
  ad::NodeId full = tape.scatter_cols(x_partial, predicted_, n_);
  if (completed_.empty()) return full;
  ad::NodeId w = tape.constant(Tensor::from_eigen(complete_w_));
  Tensor bias({completed_.size()});
  for (std::size_t j = 0; j < completed_.size(); ++j) bias[j] = complete_b_(static_cast<Eigen::Index>(j));
  ad::NodeId xc = tape.linear(x_partial, w, tape.constant(std::move(bias)));
  return tape.add(full, tape.scatter_cols(xc, completed_, n_));
}

Vector Dc3Completion::row_violation(const RowMatrix& x_partial) const {
  if (g_eff_.rows() == 0) return Vector::Zero(x_partial.rows());
  RowMatrix g = x_partial * g_eff_.transpose();
  g.rowwise() -= h_eff_.transpose();
  return g.cwiseMax(0.0).rowwise().squaredNorm();
}

Eigen::VectorXd Dc3Completion::step_sizes(const RowMatrix& x_partial, const RowMatrix& direction,
                                          double gamma, double* max_increase) const {
  const Vector before = row_violation(x_partial);
  Eigen::VectorXd steps = Eigen::VectorXd::Constant(x_partial.rows(), gamma);
  double worst = -INFINITY;
  for (Eigen::Index r = 0; r < x_partial.rows(); ++r) {
    double s = gamma;
    double after = before(r);
    for (int k = 0; k <= kMaxHalvings; ++k) {
      RowMatrix cand = x_partial.row(r) - s * direction.row(r);
      after = row_violation(cand)(0);
      if (after <= before(r)) break;
      s *= 0.5;
      if (k == kMaxHalvings) {
        s = 0.0;
        after = before(r);
      }
    }
    steps(r) = s;
    worst = std::max(worst, after - before(r));
  }
  if (max_increase) *max_increase = x_partial.rows() > 0 ? worst : 0.0;
  return steps;
}

RowMatrix Dc3Completion::correct(const RowMatrix& x_partial, int steps, double gamma,
                                 CorrectionTrace* trace) const {
  RowMatrix xp = x_partial;
  if (trace) {
    const RowMatrix full = complete(xp);
    for (Eigen::Index r = 0; r < full.rows(); ++r) {
      Vector res = constraints_.A * full.row(r).transpose() - constraints_.b;
      if (res.size() > 0) trace->eq_residual = std::max(trace->eq_residual, res.cwiseAbs().maxCoeff());
    }
  }
  if (g_eff_.rows() == 0) return xp;
  for (int t = 0; t < steps; ++t) {
    RowMatrix g = xp * g_eff_.transpose();
    g.rowwise() -= h_eff_.transpose();
    RowMatrix dir = 2.0 * g.cwiseMax(0.0) * g_eff_;
    double inc = 0.0;
    const Eigen::VectorXd s = step_sizes(xp, dir, gamma, &inc);
    xp -= (dir.array().colwise() * s.array()).matrix();
    if (trace) {
      trace->max_increase.push_back(inc);
      const RowMatrix full = complete(xp);
      for (Eigen::Index r = 0; r < full.rows(); ++r) {
        Vector res = constraints_.A * full.row(r).transpose() - constraints_.b;
        if (res.size() > 0) trace->eq_residual = std::max(trace->eq_residual, res.cwiseAbs().maxCoeff());
      }
    }
  }
  return xp;
}

ad::NodeId Dc3Completion::correct(ad::Tape& tape, ad::NodeId x_partial, int steps, double gamma,
                                  CorrectionTrace* trace) const {
  if (g_eff_.rows() == 0 || steps <= 0) return x_partial;
  ad::NodeId w = tape.constant(Tensor::from_eigen(g_eff_));
  Tensor neg_h({static_cast<std::size_t>(h_eff_.size())});
  for (Eigen::Index i = 0; i < h_eff_.size(); ++i) neg_h[static_cast<std::size_t>(i)] = -h_eff_(i);
  ad::NodeId bias = tape.constant(std::move(neg_h));
  ad::NodeId grad_map = tape.constant(Tensor::from_eigen(2.0 * g_eff_));
  ad::NodeId xp = x_partial;
  for (int t = 0; t < steps; ++t) {
    ad::NodeId viol = tape.relu(tape.linear(xp, w, bias));
    ad::NodeId dir = tape.matmul(viol, grad_map);
    double inc = 0.0;
    const Eigen::VectorXd s = step_sizes(tape.value(xp).mat(), tape.value(dir).mat(), gamma, &inc);
    if (trace) trace->max_increase.push_back(inc);
    xp = tape.sub(xp, tape.mul_col(dir, tape.constant(col_tensor(s))));
  }
  return xp;
}

RowMatrix Proxy::predict(const RowMatrix& raw_input, CorrectionTrace* trace) const {
  const RowMatrix in = input.apply(raw_input);
  RowMatrix out = net.predict(Tensor::from_eigen(in)).mat();
  out = output.invert(out);
  if (dc3) {
    out = dc3->complete(dc3->correct(out, correction_steps, correction_gamma, trace));
  }
  return out;
}

nlohmann::json Proxy::to_json() const {
  nlohmann::json doc = {{"net", net.to_json()}};
  if (!input.empty()) doc["input"] = input.to_json();
  if (!output.empty()) doc["output"] = output.to_json();
  if (dc3) {
    doc["dc3"] = {{"correction_steps", correction_steps},
                  {"correction_gamma", correction_gamma},
                  {"predicted", dc3->predicted()},
                  {"completed", dc3->completed()},
                  {"condition_number", dc3->condition_number()}};
  }
  return doc;
}

Proxy Proxy::from_json(const nlohmann::json& doc, const problems::LinearConstraints* constraints) {
  Proxy p{ad::MlpModel::from_json(doc.at("net")), {}, {}, nullptr, 0, 0.0};
  if (doc.contains("input")) p.input = Standardizer::from_json(doc.at("input"));
  if (doc.contains("output")) p.output = Standardizer::from_json(doc.at("output"));
  if (doc.contains("dc3")) {
    if (constraints == nullptr) throw MissingPrerequisite("DC3 checkpoint needs the problem constraints");
    p.dc3 = std::make_shared<Dc3Completion>(*constraints);
    if (doc.at("dc3").at("predicted").get<std::vector<std::size_t>>() != p.dc3->predicted()) {
      throw IoError("DC3 checkpoint partition differs from the problem's");
    }
    p.correction_steps = doc.at("dc3").at("correction_steps").get<int>();
    p.correction_gamma = doc.at("dc3").at("correction_gamma").get<double>();
  }
  return p;
}

void save_proxy(const Proxy& proxy, const std::string& path) {
  nlohmann::json doc = proxy.to_json();
  doc["format_version"] = ad::kCheckpointFormatVersion;
  write_file_atomic(path, doc.dump() + "\n");
}

Proxy load_proxy(const std::string& path, const problems::LinearConstraints* constraints) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse " + path + ": " + e.what());
  }
  return Proxy::from_json(doc, constraints);
}

}  // namespace ltof::trainers
