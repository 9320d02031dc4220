#include "ltof/harness/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ltof/io.hpp"
#include "ltof/solvers/restore.hpp"
#include "ltof/trainers/trainers.hpp"

namespace ltof::harness {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void check_split(const problems::ParametricProblem& problem, const EvalSplit& split) {
  const auto rows = static_cast<std::size_t>(split.zeta.rows());
  if (split.fstar.size() != rows) {
    throw MissingPrerequisite("evaluate: oracle values cover " + std::to_string(split.fstar.size()) + " of " +
                              std::to_string(rows) + " test records");
  }
  if (static_cast<std::size_t>(split.z.rows()) != rows) throw ShapeError("evaluate: z and zeta row counts differ");
  if (static_cast<std::size_t>(split.zeta.cols()) != problem.param_dim()) {
    throw ShapeError("evaluate: zeta has " + std::to_string(split.zeta.cols()) + " columns, problem expects " +
                     std::to_string(problem.param_dim()));
  }
}

std::size_t timing_rows(const EvalSplit& split, const EvalOptions& options) {
  return std::min<std::size_t>(options.timing_samples, static_cast<std::size_t>(split.z.rows()));
}

RowMatrix row_of(const RowMatrix& m, std::size_t i) { return m.row(static_cast<Eigen::Index>(i)); }

double parse_number(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw IoError("bad number '" + s + "' in results");
  }
}

}  // namespace

std::vector<std::string> result_header() {
  return {"method",   "k",      "seed",   "regret_mean", "regret_pct_mean",  "violation_pre",
          "violation_post", "it_ms", "fct_ms", "et_ms", "epochs", "early_stop_epoch",
          "regret_pct_pre_mean", "regret_p90"};
}

std::vector<std::string> result_row(const EvalReport& r) { return result_row(r, std::to_string(r.seed)); }

std::vector<std::string> result_row(const EvalReport& r, const std::string& seed_text) {
  return {r.method,
          std::to_string(r.k),
          seed_text,
          format_double(r.regret_mean),
          format_double(r.regret_pct_mean),
          format_double(r.violation_pre),
          format_double(r.violation_post),
          format_double(r.it_ms),
          format_double(r.fct_ms),
          format_double(r.et_ms),
          std::to_string(r.epochs),
          std::to_string(r.early_stop_epoch),
          format_double(r.regret_pct_pre_mean),
          format_double(r.regret_p90)};
}

EvalReport parse_result_row(const std::vector<std::string>& header, const std::vector<std::string>& row) {
  if (row.size() != header.size()) throw IoError("result row has " + std::to_string(row.size()) + " cells");
  auto cell = [&](const std::string& name) -> const std::string& {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return row[i];
    }
    throw IoError("results lack column " + name);
  };
  EvalReport r;
  r.method = cell("method");
  r.k = static_cast<std::size_t>(parse_number(cell("k")));
  const std::string& seed = cell("seed");
  r.seed = seed == "mean" ? 0 : static_cast<std::uint64_t>(std::stoull(seed));
  r.regret_mean = parse_number(cell("regret_mean"));
  r.regret_pct_mean = parse_number(cell("regret_pct_mean"));
  r.violation_pre = parse_number(cell("violation_pre"));
  r.violation_post = parse_number(cell("violation_post"));
  r.it_ms = parse_number(cell("it_ms"));
  r.fct_ms = parse_number(cell("fct_ms"));
  r.et_ms = parse_number(cell("et_ms"));
  r.epochs = static_cast<std::size_t>(parse_number(cell("epochs")));
  r.early_stop_epoch = static_cast<std::size_t>(parse_number(cell("early_stop_epoch")));
  r.regret_pct_pre_mean = parse_number(cell("regret_pct_pre_mean"));
  r.regret_p90 = parse_number(cell("regret_p90"));
  return r;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

EvalReport score(const problems::ParametricProblem& problem, const RowMatrix& x_hat, const RowMatrix& zeta,
                 const std::vector<double>& fstar) {
  const auto rows = static_cast<std::size_t>(x_hat.rows());
  if (static_cast<std::size_t>(zeta.rows()) != rows || fstar.size() != rows) {
    throw ShapeError("score: row counts differ");
  }
  solvers::Restorer restorer(problem);
  EvalReport r;
  if (rows == 0) return r;
  std::vector<double> regrets;
  regrets.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const Vector xh = x_hat.row(row).transpose();
    const Vector zt = zeta.row(row).transpose();
    const Vector x = restorer.restore(xh).x;
    const double reg = problems::regret(problem, x, zt, fstar[i]).value;
    const auto pct = problems::percentage_regret(reg, fstar[i]);
    const double reg_pre = problems::regret(problem, xh, zt, fstar[i]).value;
    regrets.push_back(reg);
    r.regret_mean += reg;
    r.regret_pct_mean += pct.value;
    r.absolute_pct_samples += pct.absolute ? 1 : 0;
    r.regret_pct_pre_mean += problems::percentage_regret(reg_pre, fstar[i]).value;
    r.violation_pre += problem.violation(xh);
    r.violation_post += problem.violation(x);
  }
  const auto count = static_cast<double>(rows);
  r.regret_mean /= count;
  r.regret_pct_mean /= count;
  r.regret_pct_pre_mean /= count;
  r.violation_pre /= count;
  r.violation_post /= count;
  r.regret_p90 = percentile(regrets, 0.9);
  return r;
}

EvalReport evaluate_proxy(const problems::ParametricProblem& problem, const trainers::Proxy& proxy,
                          const EvalSplit& split, const EvalOptions& options) {
  check_split(problem, split);
  EvalReport r = score(problem, proxy.predict(split.z), split.zeta, split.fstar);
  if (options.measure_timing) {
    solvers::Restorer restorer(problem);
    std::vector<double> it;
    std::vector<double> fct;
    for (std::size_t i = 0; i < timing_rows(split, options); ++i) {
      const RowMatrix input = row_of(split.z, i);
      auto t0 = Clock::now();
      const RowMatrix x = proxy.predict(input);
      it.push_back(elapsed_ms(t0));
      t0 = Clock::now();
      restorer.restore(x.row(0).transpose());
      fct.push_back(elapsed_ms(t0));
    }
    r.it_ms = median(it);
    r.fct_ms = median(fct);
  }
  return r;
}

EvalReport evaluate_two_stage(const problems::ParametricProblem& problem, const trainers::Proxy& predictor,
                              const solvers::OracleOptions& oracle_options, const EvalSplit& split,
                              const EvalOptions& options) {
  check_split(problem, split);
  const RowMatrix zeta_hat = predictor.predict(split.z);
  solvers::Oracle oracle(problem, oracle_options);
  RowMatrix x(zeta_hat.rows(), static_cast<Eigen::Index>(problem.n()));
  for (Eigen::Index i = 0; i < zeta_hat.rows(); ++i) {
    x.row(i) = oracle.solve(zeta_hat.row(i).transpose(), static_cast<std::uint64_t>(i)).x.transpose();
  }
  EvalReport r = score(problem, x, split.zeta, split.fstar);
  if (options.measure_timing) {
    std::vector<double> it;
    std::vector<double> et;
    for (std::size_t i = 0; i < timing_rows(split, options); ++i) {
      const RowMatrix input = row_of(split.z, i);
      auto t0 = Clock::now();
      const RowMatrix zh = predictor.predict(input);
      it.push_back(elapsed_ms(t0));
      t0 = Clock::now();
      oracle.solve(zh.row(0).transpose(), i);
      et.push_back(elapsed_ms(t0));
    }
    r.it_ms = median(it);
    r.et_ms = median(et);
  }
  return r;
}

EvalReport evaluate_epo(const problems::ParametricProblem& problem, const trainers::Proxy& predictor,
                        const trainers::Proxy& frozen, const EvalSplit& split, const EvalOptions& options) {
  check_split(problem, split);
  EvalReport r = score(problem, trainers::epo_predict(predictor, frozen, split.z), split.zeta, split.fstar);
  if (options.measure_timing) {
    solvers::Restorer restorer(problem);
    std::vector<double> it;
    std::vector<double> fct;
    for (std::size_t i = 0; i < timing_rows(split, options); ++i) {
      const RowMatrix input = row_of(split.z, i);
      auto t0 = Clock::now();
      const RowMatrix x = trainers::epo_predict(predictor, frozen, input);
      it.push_back(elapsed_ms(t0));
      t0 = Clock::now();
      restorer.restore(x.row(0).transpose());
      fct.push_back(elapsed_ms(t0));
    }
    r.it_ms = median(it);
    r.fct_ms = median(fct);
  }
  return r;
}

EvalReport evaluate_oracle(const problems::ParametricProblem& problem, const solvers::OracleOptions& oracle_options,
                           const EvalSplit& split, const EvalOptions& options) {
  check_split(problem, split);
  solvers::Oracle oracle(problem, oracle_options);
  RowMatrix x(split.zeta.rows(), static_cast<Eigen::Index>(problem.n()));
  std::vector<double> et;
  for (Eigen::Index i = 0; i < split.zeta.rows(); ++i) {
    const auto t0 = Clock::now();
    x.row(i) = oracle.solve(split.zeta.row(i).transpose(), static_cast<std::uint64_t>(i)).x.transpose();
    if (options.measure_timing && static_cast<std::size_t>(i) < options.timing_samples) et.push_back(elapsed_ms(t0));
  }
  EvalReport r = score(problem, x, split.zeta, split.fstar);
  if (options.measure_timing) r.et_ms = median(et);
  return r;
}

}  // namespace ltof::harness
