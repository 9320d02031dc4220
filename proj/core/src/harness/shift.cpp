#include "ltof/harness/shift.hpp"

#include <cmath>

#include "ltof/harness/evaluate.hpp"
#include "ltof/io.hpp"
#include "ltof/problems/nonconvex_qp.hpp"
#include "ltof/problems/toy2d.hpp"

namespace ltof::harness {

std::vector<ShiftPoint> shift_sweep(const problems::ParametricProblem& problem, const trainers::Proxy& proxy,
                                    const RowMatrix& base_zeta, const Vector& direction, double sigma,
                                    const std::vector<double>& magnitudes, const solvers::OracleOptions& oracle) {
  if (static_cast<std::size_t>(direction.size()) != problem.param_dim() ||
      static_cast<std::size_t>(base_zeta.cols()) != problem.param_dim()) {
    throw ShapeError("shift_sweep: direction and samples must match the parameter dimension");
  }
  std::vector<ShiftPoint> out;
  for (double s : magnitudes) {
    RowMatrix zeta = base_zeta;
    zeta.rowwise() += (s * sigma * direction).transpose();
    const solvers::OracleCache cache = solvers::build_oracle_cache(problem, zeta, oracle);
    const EvalReport r = score(problem, proxy.predict(zeta), zeta, cache.f);
    out.push_back({s, r.regret_mean, r.regret_pct_mean, r.violation_pre});
  }
  return out;
}

std::string shift_csv(const std::vector<ShiftPoint>& points) {
  CsvTable table;
  table.header = {"shift", "regret_mean", "regret_pct_mean", "violation_pre"};
  for (const auto& p : points) {
    table.rows.push_back({format_double(p.shift), format_double(p.regret_mean), format_double(p.regret_pct_mean),
                          format_double(p.violation_pre)});
  }
  return to_csv(table);
}

ShiftRun run_toy2d_shift(const RunConfig& config, std::uint64_t seed) {
  const auto& sc = config.shift;
  auto problem = std::make_shared<problems::Toy2DProblem>();
  const RowMatrix train_zeta =
      problems::sample_uniform_params(sc.train_samples, 2, sc.low, sc.high, solvers::mix_seed(seed, 11));
  const RowMatrix test_zeta =
      problems::sample_uniform_params(sc.test_samples, 2, sc.low, sc.high, solvers::mix_seed(seed, 12));

  problems::PtoDataset data;
  data.zeta = RowMatrix(train_zeta.rows() + test_zeta.rows(), 2);
  data.zeta << train_zeta, test_zeta;
  data.z = data.zeta;
  const auto cache = solvers::build_oracle_cache(*problem, data.zeta);
  data.xstar = cache.x;
  data.fstar = cache.f;
  data.split.assign(data.size(), problems::Split::kTrain);
  for (std::size_t i = sc.train_samples; i < data.size(); ++i) data.split[i] = problems::Split::kTest;

  trainers::TrainOptions train = config.train;
  train.seed = seed;
  const auto set = trainers::make_training_set(problem, data, true);
  auto trained = trainers::pretrain_proxy(trainers::parse_method(sc.method), set, config.model, train,
                                          config.methods);

  ShiftRun run;
  run.sigma = (sc.high - sc.low) / std::sqrt(12.0);
  run.direction = Vector(2);
  run.direction << sc.direction[0], sc.direction[1];
  run.direction.normalize();
  run.curve = shift_sweep(*problem, trained.proxy, test_zeta, run.direction, run.sigma, sc.magnitudes);
  run.proxy = std::move(trained.proxy);
  run.history = std::move(trained.history);
  return run;
}

}  // namespace ltof::harness
