#include "ltof/trainers/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>

#include "ltof/autodiff/adam.hpp"
#include "ltof/io.hpp"

namespace ltof::trainers {

namespace {

using problems::take_rows;

Tensor row_tensor(const Vector& v) {
  Tensor t({static_cast<std::size_t>(v.size())});
  for (Eigen::Index i = 0; i < v.size(); ++i) t[static_cast<std::size_t>(i)] = v(i);
  return t;
}

Tensor row_tensor(const Eigen::RowVectorXd& v) { return row_tensor(Vector(v.transpose())); }

ad::MlpModel make_net(const ModelOptions& model, std::size_t in, std::size_t out, std::size_t layers,
                      std::uint64_t seed) {
  ad::MlpConfig config;
  config.layer_dims.push_back(in);
  for (std::size_t l = 0; l < layers; ++l) config.layer_dims.push_back(model.hidden_width);
  config.layer_dims.push_back(out);
  config.dropout_rate = model.dropout;
  config.batchnorm = model.batchnorm;
  return ad::MlpModel::init(config, seed);
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    // Batch statistics need at least two rows.
    if (end - start < 2) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

/// sign * mean_b f(x_b, zeta_b)
ad::NodeId objective_term(ad::Tape& tape, const problems::ParametricProblem& problem, ad::NodeId x,
                          const RowMatrix& zeta) {
  ad::NodeId z = tape.constant(Tensor::from_eigen(zeta));
  return tape.scale(tape.mean(problem.objective_node(tape, x, z)), problem.sense_sign());
}

double max_eq_residual(const problems::ParametricProblem& problem, const RowMatrix& x) {
  if (problem.n_eq() == 0) return 0.0;
  const auto& c = problem.constraints();
  RowMatrix r = x * c.A.transpose();
  r.rowwise() -= c.b.transpose();
  return r.cwiseAbs().maxCoeff();
}

using LossFn = std::function<ad::NodeId(ad::Tape&, ad::NodeId out, const std::vector<std::size_t>& rows,
                                        EpochRecord& record)>;
using EpochFn = std::function<void(std::size_t epoch, EpochRecord& record)>;
using EvalFn = std::function<double(const ad::MlpModel& net, EpochRecord& record)>;

/// Mini-batch Adam over `n_train` rows of the standardized inputs, with
/// early stopping on `evaluate` and restoration of the best weights.
TrainHistory run_loop(ad::MlpModel& net, const RowMatrix& inputs, const TrainOptions& options,
                      std::mt19937_64& rng, const LossFn& loss_fn, const EpochFn& end_epoch,
                      const EvalFn& evaluate) {
  TrainHistory history;
  ad::AdamState adam = ad::AdamState::for_weights(net.parameters(), options.learning_rate);
  ad::MlpModel best = net;
  double best_metric = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const auto n = static_cast<std::size_t>(inputs.rows());

  for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (const auto& rows : make_batches(n, options.batch_size, rng)) {
      ad::Tape tape;
      const auto bound = net.bind(tape, true);
      ad::NodeId in = tape.input(Tensor::from_eigen(take_rows(inputs, rows)), false);
      ad::NodeId out = net.forward(tape, bound, in, ad::Mode::kTraining, &rng);
      ad::NodeId loss = loss_fn(tape, out, rows, record);
      const double value = tape.value(loss)[0];
      if (!std::isfinite(value)) {
        throw ad::DivergenceError("non-finite loss at epoch " + std::to_string(epoch));
      }
      const ad::Gradients grads = tape.backward(loss);
      std::vector<Tensor> g;
      g.reserve(bound.size());
      for (std::size_t i = 0; i < bound.size(); ++i) g.push_back(grads.get_or_zero(bound[i], net.parameters()[i]));
      ad::adam_step(net.parameters(), g, adam);
      loss_sum += value;
      ++batches;
    }
    record.loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
    if (end_epoch) end_epoch(epoch, record);
    const double metric = evaluate(net, record);
    record.test_metric = metric;
    history.epochs.push_back(record);
    if (metric < best_metric) {
      best_metric = metric;
      best = net;
      history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      history.early_stop_epoch = epoch;
      break;
    }
  }
  if (history.best_epoch > 0) net = std::move(best);
  return history;
}

double stop_value(const DecisionScores& s, StopMetric metric) {
  return metric == StopMetric::kRegretPct ? s.regret_pct_mean : s.regret_mean;
}

void require_oracle_values(const TrainingSet& data) {
  if (data.fstar_test.size() != static_cast<std::size_t>(data.zeta_test.rows())) {
    throw MissingPrerequisite("test split has no oracle values for early stopping");
  }
}

RowMatrix relu_rows(RowMatrix m) { return m.cwiseMax(0.0); }

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::kLd: return "ld";
    case Method::kPdl: return "pdl";
    case Method::kDc3: return "dc3";
    case Method::kTwoStage: return "two-stage";
    case Method::kEpoProxy: return "epo-proxy";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "ld") return Method::kLd;
  if (name == "pdl") return Method::kPdl;
  if (name == "dc3") return Method::kDc3;
  if (name == "two-stage") return Method::kTwoStage;
  if (name == "epo-proxy") return Method::kEpoProxy;
  throw ConfigError("unknown method '" + name + "'; valid methods: ld, pdl, dc3, two-stage, epo-proxy");
}

bool is_ltof(Method method) {
  return method == Method::kLd || method == Method::kPdl || method == Method::kDc3;
}

TrainingSet make_training_set(std::shared_ptr<const problems::ParametricProblem> problem,
                              const problems::PtoDataset& data, bool use_zeta_as_input) {
  data.validate();
  const auto train = data.indices(problems::Split::kTrain);
  const auto test = data.indices(problems::Split::kTest);
  const RowMatrix& inputs = use_zeta_as_input || data.z.cols() == 0 ? data.zeta : data.z;
  TrainingSet set;
  set.problem = std::move(problem);
  set.z_train = take_rows(inputs, train);
  set.zeta_train = take_rows(data.zeta, train);
  set.z_test = take_rows(inputs, test);
  set.zeta_test = take_rows(data.zeta, test);
  if (data.has_oracle()) {
    set.xstar_train = take_rows(*data.xstar, train);
    for (std::size_t i : test) set.fstar_test.push_back(data.fstar[i]);
  }
  return set;
}

std::string TrainHistory::to_csv() const {
  CsvTable table;
  table.header = {"epoch",         "loss",       "test_metric", "test_regret",
                  "test_regret_pct", "violation_pre", "multiplier_norm", "lambda_min",
                  "rho",           "eq_residual", "correction_increase"};
  for (const EpochRecord& r : epochs) {
    table.rows.push_back({std::to_string(r.epoch), format_double(r.loss), format_double(r.test_metric),
                          format_double(r.test_regret), format_double(r.test_regret_pct),
                          format_double(r.violation_pre), format_double(r.multiplier_norm),
                          format_double(r.lambda_min), format_double(r.rho), format_double(r.eq_residual),
                          format_double(r.correction_increase)});
  }
  return ltof::to_csv(table);
}

DecisionScores score_decisions(const problems::ParametricProblem& problem, solvers::Restorer& restorer,
                               const RowMatrix& x_hat, const RowMatrix& zeta,
                               const std::vector<double>& fstar) {
  const auto rows = static_cast<std::size_t>(x_hat.rows());
  if (static_cast<std::size_t>(zeta.rows()) != rows || fstar.size() != rows) {
    throw ShapeError("score_decisions: row counts differ");
  }
  DecisionScores s;
  if (rows == 0) return s;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Vector xh = x_hat.row(r).transpose();
    const Vector zt = zeta.row(r).transpose();
    const Vector x = restorer.restore(xh).x;
    const double reg = problems::regret(problem, x, zt, fstar[i]).value;
    const double pct = problems::percentage_regret(reg, fstar[i]).value;
    s.regrets.push_back(reg);
    s.regret_pcts.push_back(pct);
    s.violation_pre += problem.violation(xh);
    s.violation_post += problem.violation(x);
  }
  const auto count = static_cast<double>(rows);
  s.regret_mean = std::accumulate(s.regrets.begin(), s.regrets.end(), 0.0) / count;
  s.regret_pct_mean = std::accumulate(s.regret_pcts.begin(), s.regret_pcts.end(), 0.0) / count;
  s.violation_pre /= count;
  s.violation_post /= count;
  return s;
}

LdState ld_initial_state(const problems::ParametricProblem& problem, const LdOptions& options) {
  return {Vector::Constant(static_cast<Eigen::Index>(problem.n_ineq()), options.lambda0),
          Vector::Constant(static_cast<Eigen::Index>(problem.n_eq()), options.mu0), options.step()};
}

double ld_loss(const RowMatrix& x_hat, const RowMatrix& x_star, const problems::ParametricProblem& problem,
               const LdState& state) {
  if (x_hat.rows() != x_star.rows() || x_hat.cols() != x_star.cols()) {
    throw ShapeError("ld_loss: prediction and target shapes differ");
  }
  double total = 0.0;
  for (Eigen::Index r = 0; r < x_hat.rows(); ++r) {
    const Vector x = x_hat.row(r).transpose();
    total += (x - x_star.row(r).transpose()).squaredNorm();
    if (problem.n_ineq() > 0) total += state.lambda.dot(problem.ineq_residual(x).cwiseMax(0.0));
    if (problem.n_eq() > 0) total += state.mu.dot(problem.eq_residual(x));
  }
  return total / static_cast<double>(x_hat.rows());
}

LdState ld_multiplier_update(LdState state, const Vector& mean_ineq_violation,
                             const Vector& mean_eq_residual) {
  state.lambda += state.step * mean_ineq_violation.cwiseMax(0.0);
  state.mu += state.step * mean_eq_residual;
  return state;
}

double pdl_primal_loss(const RowMatrix& x_hat, const RowMatrix& zeta, const RowMatrix& lambda_hat,
                       const RowMatrix& mu_hat, double rho, const problems::ParametricProblem& problem) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < x_hat.rows(); ++r) {
    const Vector x = x_hat.row(r).transpose();
    double v = problem.sense_sign() * problem.objective(x, zeta.row(r).transpose());
    if (problem.n_ineq() > 0) {
      const Vector g = problem.ineq_residual(x);
      v += lambda_hat.row(r).cwiseMax(0.0).dot(g.transpose());
      v += 0.5 * rho * g.cwiseMax(0.0).squaredNorm();
    }
    if (problem.n_eq() > 0) {
      const Vector h = problem.eq_residual(x);
      v += mu_hat.row(r).dot(h.transpose());
      v += 0.5 * rho * h.squaredNorm();
    }
    total += v;
  }
  return total / static_cast<double>(x_hat.rows());
}

PdlState pdl_initial_state(const problems::ParametricProblem& problem, std::size_t instances,
                           const PdlOptions& options) {
  PdlState s;
  const auto n = static_cast<Eigen::Index>(instances);
  s.lambda = RowMatrix::Zero(n, static_cast<Eigen::Index>(problem.n_ineq()));
  s.mu = RowMatrix::Zero(n, static_cast<Eigen::Index>(problem.n_eq()));
  s.rho = options.rho0;
  s.rho_max = options.rho_max;
  s.alpha = options.alpha;
  s.tau = options.tau;
  return s;
}

void pdl_outer_update(PdlState& state, const RowMatrix& x_hat, const problems::ParametricProblem& problem) {
  if (x_hat.rows() != state.lambda.rows()) throw ShapeError("pdl_outer_update: instance count mismatch");
  double worst = 0.0;
  for (Eigen::Index r = 0; r < x_hat.rows(); ++r) {
    const Vector x = x_hat.row(r).transpose();
    if (problem.n_ineq() > 0) {
      const Vector g = problem.ineq_residual(x);
      state.lambda.row(r) = (state.lambda.row(r) + state.rho * g.transpose()).cwiseMax(0.0);
      worst = std::max(worst, g.maxCoeff());
    }
    if (problem.n_eq() > 0) {
      const Vector h = problem.eq_residual(x);
      state.mu.row(r) += state.rho * h.transpose();
      worst = std::max(worst, h.cwiseAbs().maxCoeff());
    }
  }
  if (worst > state.tau * state.previous_violation) {
    state.rho = std::min(state.alpha * state.rho, state.rho_max);
  }
  state.previous_violation = worst;
}

double dc3_loss(const RowMatrix& x, const RowMatrix& zeta, const problems::ParametricProblem& problem,
                double lambda, double mu) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Vector xr = x.row(r).transpose();
    double v = problem.sense_sign() * problem.objective(xr, zeta.row(r).transpose());
    if (problem.n_ineq() > 0) v += lambda * problem.ineq_residual(xr).cwiseMax(0.0).squaredNorm();
    if (problem.n_eq() > 0) v += mu * problem.eq_residual(xr).squaredNorm();
    total += v;
  }
  return total / static_cast<double>(x.rows());
}

TrainResult train_ltof(Method method, const TrainingSet& data, const ModelOptions& model,
                       const TrainOptions& train, const MethodOptions& methods) {
  if (!is_ltof(method)) throw ConfigError("train_ltof expects ld, pdl or dc3");
  require_oracle_values(data);
  const problems::ParametricProblem& problem = *data.problem;
  if (method == Method::kLd && !data.xstar_train) {
    throw MissingPrerequisite("LD needs oracle solutions for the training split");
  }

  std::mt19937_64 rng(train.seed);
  Proxy proxy;
  proxy.input = Standardizer::fit(data.z_train);
  std::size_t out_dim = problem.n();
  if (method == Method::kDc3) {
    proxy.dc3 = std::make_shared<Dc3Completion>(problem.constraints());
    proxy.correction_steps = methods.dc3.t_test;
    proxy.correction_gamma = methods.dc3.gamma;
    out_dim = proxy.dc3->n_partial();
  }
  const auto in_dim = static_cast<std::size_t>(data.z_train.cols());
  ad::MlpModel net = make_net(model, in_dim, out_dim, model.hidden_layers, rng());
  const RowMatrix inputs = proxy.input.apply(data.z_train);
  solvers::Restorer restorer(problem);

  EvalFn evaluate = [&](const ad::MlpModel& current, EpochRecord& record) {
    Proxy snapshot = proxy;
    snapshot.net = current;
    const RowMatrix x_hat = snapshot.predict(data.z_test);
    const DecisionScores s = score_decisions(problem, restorer, x_hat, data.zeta_test, data.fstar_test);
    record.test_regret = s.regret_mean;
    record.test_regret_pct = s.regret_pct_mean;
    record.violation_pre = s.violation_pre;
    const double v = stop_value(s, train.stop_metric);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  LossFn loss_fn;
  EpochFn end_epoch;

  // LD state and per-epoch violation accumulators.
  LdState ld = ld_initial_state(problem, methods.ld);
  Vector ineq_acc = Vector::Zero(static_cast<Eigen::Index>(problem.n_ineq()));
  Vector eq_acc = Vector::Zero(static_cast<Eigen::Index>(problem.n_eq()));
  double rows_acc = 0.0;

  // PDL state and dual network.
  PdlState pdl = pdl_initial_state(problem, static_cast<std::size_t>(data.z_train.rows()), methods.pdl);
  const std::size_t n_dual = problem.n_ineq() + problem.n_eq();
  ad::MlpModel dual = make_net(model, in_dim, std::max<std::size_t>(n_dual, 1), model.hidden_layers, rng());
  // Zero output layer: the dual estimates start at 0.
  for (std::size_t k = dual.parameters().size() - 2; k < dual.parameters().size(); ++k) {
    for (double& v : dual.parameters()[k].data()) v = 0.0;
  }
  RowMatrix dual_pred = RowMatrix::Zero(inputs.rows(), static_cast<Eigen::Index>(n_dual));
  std::uint64_t dual_seed = rng();

  const auto m_in = static_cast<Eigen::Index>(problem.n_ineq());
  const auto m_eq = static_cast<Eigen::Index>(problem.n_eq());
  const Dc3Options& dc3_opt = methods.dc3;

  if (method == Method::kLd) {
    const RowMatrix* xstar = &*data.xstar_train;
    loss_fn = [&, xstar](ad::Tape& tape, ad::NodeId x, const std::vector<std::size_t>& rows, EpochRecord&) {
      ad::NodeId target = tape.constant(Tensor::from_eigen(take_rows(*xstar, rows)));
      ad::NodeId loss = tape.mean(tape.row_sum(tape.square(tape.sub(x, target))));
      const auto b = static_cast<double>(rows.size());
      if (problem.n_ineq() > 0) {
        ad::NodeId viol = tape.relu(problem.ineq_node(tape, x));
        ad::NodeId term = tape.mean(tape.row_sum(tape.mul_row(viol, tape.constant(row_tensor(ld.lambda)))));
        loss = tape.add(loss, term);
        ineq_acc += tape.value(viol).mat().colwise().sum().transpose();
      }
      if (problem.n_eq() > 0) {
        ad::NodeId h = problem.eq_node(tape, x);
        ad::NodeId term = tape.mean(tape.row_sum(tape.mul_row(h, tape.constant(row_tensor(ld.mu)))));
        loss = tape.add(loss, term);
        eq_acc += tape.value(h).mat().colwise().sum().transpose();
      }
      rows_acc += b;
      return loss;
    };
    end_epoch = [&](std::size_t epoch, EpochRecord& record) {
      if (epoch % methods.ld.update_period == 0 && rows_acc > 0.0) {
        ld = ld_multiplier_update(ld, ineq_acc / rows_acc, eq_acc / rows_acc);
        ineq_acc.setZero();
        eq_acc.setZero();
        rows_acc = 0.0;
      }
      record.multiplier_norm = std::sqrt(ld.lambda.squaredNorm() + ld.mu.squaredNorm());
      record.lambda_min = ld.lambda.size() > 0 ? ld.lambda.minCoeff() : 0.0;
    };
  } else if (method == Method::kPdl) {
    loss_fn = [&](ad::Tape& tape, ad::NodeId x, const std::vector<std::size_t>& rows, EpochRecord&) {
      ad::NodeId loss = objective_term(tape, problem, x, take_rows(data.zeta_train, rows));
      const RowMatrix duals = take_rows(dual_pred, rows);
      if (m_in > 0) {
        ad::NodeId g = problem.ineq_node(tape, x);
        ad::NodeId lam = tape.constant(Tensor::from_eigen(relu_rows(duals.leftCols(m_in))));
        loss = tape.add(loss, tape.mean(tape.row_sum(tape.mul(g, lam))));
        ad::NodeId pen = tape.mean(tape.row_sum(tape.square(tape.relu(g))));
        loss = tape.add(loss, tape.scale(pen, 0.5 * pdl.rho));
      }
      if (m_eq > 0) {
        ad::NodeId h = problem.eq_node(tape, x);
        ad::NodeId mu = tape.constant(Tensor::from_eigen(duals.rightCols(m_eq)));
        loss = tape.add(loss, tape.mean(tape.row_sum(tape.mul(h, mu))));
        ad::NodeId pen = tape.mean(tape.row_sum(tape.square(h)));
        loss = tape.add(loss, tape.scale(pen, 0.5 * pdl.rho));
      }
      return loss;
    };
    end_epoch = [&](std::size_t epoch, EpochRecord& record) {
      if (epoch % methods.pdl.primal_epochs == 0 && n_dual > 0) {
        const RowMatrix x_hat = net.predict(Tensor::from_eigen(inputs)).mat();
        pdl_outer_update(pdl, x_hat, problem);
        RowMatrix targets(inputs.rows(), static_cast<Eigen::Index>(n_dual));
        targets << pdl.lambda, pdl.mu;
        std::mt19937_64 dual_rng(dual_seed + epoch);
        ad::AdamState adam = ad::AdamState::for_weights(dual.parameters(), train.learning_rate);
        for (std::size_t e = 0; e < methods.pdl.dual_epochs; ++e) {
          for (const auto& rows : make_batches(static_cast<std::size_t>(inputs.rows()), train.batch_size, dual_rng)) {
            ad::Tape tape;
            const auto bound = dual.bind(tape, true);
            ad::NodeId in = tape.input(Tensor::from_eigen(take_rows(inputs, rows)), false);
            ad::NodeId out = dual.forward(tape, bound, in, ad::Mode::kTraining, &dual_rng);
            ad::NodeId t = tape.constant(Tensor::from_eigen(take_rows(targets, rows)));
            ad::NodeId loss = tape.mean(tape.row_sum(tape.square(tape.sub(out, t))));
            if (!std::isfinite(tape.value(loss)[0])) throw ad::DivergenceError("dual network diverged");
            const ad::Gradients grads = tape.backward(loss);
            std::vector<Tensor> g;
            for (std::size_t i = 0; i < bound.size(); ++i) g.push_back(grads.get_or_zero(bound[i], dual.parameters()[i]));
            ad::adam_step(dual.parameters(), g, adam);
          }
        }
        dual_pred = dual.predict(Tensor::from_eigen(inputs)).mat();
        if (m_in > 0) dual_pred.leftCols(m_in) = relu_rows(dual_pred.leftCols(m_in));
      }
      record.rho = pdl.rho;
      record.multiplier_norm = std::sqrt(pdl.lambda.squaredNorm() + pdl.mu.squaredNorm());
      record.lambda_min = pdl.lambda.size() > 0 ? pdl.lambda.minCoeff() : 0.0;
    };
  } else {
    std::shared_ptr<const Dc3Completion> dc3 = proxy.dc3;
    loss_fn = [&, dc3](ad::Tape& tape, ad::NodeId xp, const std::vector<std::size_t>& rows, EpochRecord& record) {
      CorrectionTrace trace;
      ad::NodeId corrected = dc3->correct(tape, xp, dc3_opt.t_train, dc3_opt.gamma, &trace);
      ad::NodeId x = dc3->complete(tape, corrected);
      for (double inc : trace.max_increase) record.correction_increase = std::max(record.correction_increase, inc);
      record.eq_residual = std::max(record.eq_residual, max_eq_residual(problem, tape.value(x).mat()));
      ad::NodeId loss = objective_term(tape, problem, x, take_rows(data.zeta_train, rows));
      if (problem.n_ineq() > 0) {
        ad::NodeId pen = tape.mean(tape.row_sum(tape.square(tape.relu(problem.ineq_node(tape, x)))));
        loss = tape.add(loss, tape.scale(pen, dc3_opt.lambda));
      }
      if (problem.n_eq() > 0) {
        ad::NodeId pen = tape.mean(tape.row_sum(tape.square(problem.eq_node(tape, x))));
        loss = tape.add(loss, tape.scale(pen, dc3_opt.mu));
      }
      return loss;
    };
    end_epoch = [](std::size_t, EpochRecord&) {};
  }

  TrainHistory history = run_loop(net, inputs, train, rng, loss_fn, end_epoch, evaluate);
  proxy.net = std::move(net);
  return {std::move(proxy), std::move(history)};
}

TrainResult pretrain_proxy(Method method, const TrainingSet& data, const ModelOptions& model,
                           const TrainOptions& train, const MethodOptions& methods) {
  if (data.z_train.cols() != data.zeta_train.cols()) {
    throw ConfigError("pretrain_proxy expects the parameters as inputs");
  }
  return train_ltof(method, data, model, train, methods);
}

TrainResult train_two_stage(const TrainingSet& data, const ModelOptions& model, const TrainOptions& train,
                            const TwoStageOptions& options) {
  std::mt19937_64 rng(train.seed);
  Proxy proxy;
  proxy.input = Standardizer::fit(data.z_train);
  proxy.output = Standardizer::fit(data.zeta_train);
  const auto in_dim = static_cast<std::size_t>(data.z_train.cols());
  const auto out_dim = static_cast<std::size_t>(data.zeta_train.cols());
  ad::MlpModel net = make_net(model, in_dim, out_dim, options.layers, rng());
  const RowMatrix inputs = proxy.input.apply(data.z_train);
  const RowMatrix targets = proxy.output.apply(data.zeta_train);

  LossFn loss_fn = [&](ad::Tape& tape, ad::NodeId out, const std::vector<std::size_t>& rows, EpochRecord&) {
    ad::NodeId t = tape.constant(Tensor::from_eigen(take_rows(targets, rows)));
    return tape.mean(tape.row_sum(tape.square(tape.sub(out, t))));
  };
  EvalFn evaluate = [&](const ad::MlpModel& current, EpochRecord&) {
    Proxy snapshot = proxy;
    snapshot.net = current;
    const RowMatrix pred = snapshot.predict(data.z_test);
    const double mse = (pred - data.zeta_test).squaredNorm() / static_cast<double>(pred.size());
    return std::isfinite(mse) ? mse : std::numeric_limits<double>::infinity();
  };
  TrainHistory history = run_loop(net, inputs, train, rng, loss_fn, nullptr, evaluate);
  proxy.net = std::move(net);
  return {std::move(proxy), std::move(history)};
}

RowMatrix epo_predict(const Proxy& predictor, const Proxy& frozen, const RowMatrix& z) {
  return frozen.predict(predictor.predict(z));
}

TrainResult train_epo_with_frozen_proxy(const TrainingSet& data, const Proxy& frozen,
                                        const ModelOptions& model, const TrainOptions& train,
                                        const EpoOptions& options) {
  require_oracle_values(data);
  const problems::ParametricProblem& problem = *data.problem;
  if (frozen.net.input_dim() != problem.param_dim()) {
    throw ConfigError("frozen proxy input width does not match the parameter dimension");
  }
  std::mt19937_64 rng(train.seed);
  Proxy predictor;
  predictor.input = Standardizer::fit(data.z_train);
  predictor.output = Standardizer::fit(data.zeta_train);
  const auto in_dim = static_cast<std::size_t>(data.z_train.cols());
  ad::MlpModel net = make_net(model, in_dim, problem.param_dim(), options.layers, rng());
  const RowMatrix inputs = predictor.input.apply(data.z_train);
  Proxy fixed = frozen;
  solvers::Restorer restorer(problem);

  // Affine chain from the predictor's standardized output to the frozen
  // proxy's standardized input.
  auto to_frozen_input = [&](ad::Tape& tape, ad::NodeId u) {
    ad::NodeId zeta_hat = tape.add_row(tape.mul_row(u, tape.constant(row_tensor(predictor.output.scale))),
                                       tape.constant(row_tensor(predictor.output.mean)));
    if (fixed.input.empty()) return zeta_hat;
    Eigen::RowVectorXd neg_mean = -fixed.input.mean;
    Eigen::RowVectorXd inv_scale = fixed.input.scale.cwiseInverse();
    return tape.mul_row(tape.add_row(zeta_hat, tape.constant(row_tensor(neg_mean))),
                        tape.constant(row_tensor(inv_scale)));
  };

  LossFn loss_fn = [&](ad::Tape& tape, ad::NodeId u, const std::vector<std::size_t>& rows, EpochRecord&) {
    const auto frozen_bound = fixed.net.bind(tape, false);
    ad::NodeId x = fixed.net.forward(tape, frozen_bound, to_frozen_input(tape, u), ad::Mode::kInference, nullptr);
    if (!fixed.output.empty()) {
      x = tape.add_row(tape.mul_row(x, tape.constant(row_tensor(fixed.output.scale))),
                       tape.constant(row_tensor(fixed.output.mean)));
    }
    if (fixed.dc3) {
      x = fixed.dc3->complete(tape, fixed.dc3->correct(tape, x, fixed.correction_steps, fixed.correction_gamma));
    }
    return objective_term(tape, problem, x, take_rows(data.zeta_train, rows));
  };
  EvalFn evaluate = [&](const ad::MlpModel& current, EpochRecord& record) {
    Proxy snapshot = predictor;
    snapshot.net = current;
    const RowMatrix x_hat = epo_predict(snapshot, fixed, data.z_test);
    const DecisionScores s = score_decisions(problem, restorer, x_hat, data.zeta_test, data.fstar_test);
    record.test_regret = s.regret_mean;
    record.test_regret_pct = s.regret_pct_mean;
    record.violation_pre = s.violation_pre;
    const double v = stop_value(s, train.stop_metric);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  TrainHistory history = run_loop(net, inputs, train, rng, loss_fn, nullptr, evaluate);
  predictor.net = std::move(net);
  return {std::move(predictor), std::move(history)};
}

}  // namespace ltof::trainers
