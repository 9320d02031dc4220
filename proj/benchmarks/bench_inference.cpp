// Per-sample cost of a proxy forward pass against the oracles it replaces.
#include <benchmark/benchmark.h>

#include "ltof/autodiff/mlp.hpp"
#include "ltof/autodiff/tape.hpp"
#include "ltof/problems/nonconvex_qp.hpp"
#include "ltof/problems/portfolio.hpp"
#include "ltof/solvers/oracles.hpp"
#include "ltof/solvers/restore.hpp"
#include "ltof/trainers/proxy.hpp"

using namespace ltof;

namespace {

trainers::Proxy make_proxy(std::size_t in, std::size_t width, std::size_t out) {
  trainers::Proxy p;
  p.net = ad::MlpModel::init({{in, width, width, out}, 0.0, false}, 1);
  p.input = trainers::Standardizer::identity(in);
  p.output = trainers::Standardizer::identity(out);
  return p;
}

problems::PortfolioData portfolio(std::size_t assets) {
  problems::PortfolioDataConfig cfg;
  cfg.assets = assets;
  cfg.samples = 64;
  cfg.periods = 64;
  return problems::generate_portfolio_data(cfg);
}

void BM_ProxyInference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto proxy = make_proxy(n, static_cast<std::size_t>(state.range(1)), n);
  const RowMatrix z = problems::sample_uniform_params(1, n, -1.0, 1.0, 2);
  for (auto _ : state) benchmark::DoNotOptimize(proxy.predict(z));
}
BENCHMARK(BM_ProxyInference)->Args({20, 128})->Args({50, 500})->Unit(benchmark::kMicrosecond);

void BM_PortfolioRestore(benchmark::State& state) {
  const auto data = portfolio(static_cast<std::size_t>(state.range(0)));
  solvers::Restorer restorer(*data.problem);
  const Vector x = data.zetas.row(0).transpose();
  for (auto _ : state) benchmark::DoNotOptimize(restorer.restore(x));
}
BENCHMARK(BM_PortfolioRestore)->Arg(20)->Arg(50)->Unit(benchmark::kMicrosecond);

void BM_PortfolioOracle(benchmark::State& state) {
  const auto data = portfolio(static_cast<std::size_t>(state.range(0)));
  solvers::Oracle oracle(*data.problem);
  std::size_t row = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle.solve(data.zetas.row(static_cast<Eigen::Index>(row % 64)).transpose(), row));
    ++row;
  }
}
BENCHMARK(BM_PortfolioOracle)->Arg(20)->Arg(50)->Unit(benchmark::kMicrosecond);

void BM_NonconvexOracle(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto problem = problems::generate_nonconvex_instance(n, n / 2, n / 2, 0);
  solvers::Oracle oracle(*problem);
  const RowMatrix zeta = problems::sample_uniform_params(64, n, -1.0, 1.0, 3);
  std::size_t row = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle.solve(zeta.row(static_cast<Eigen::Index>(row % 64)).transpose(), row));
    ++row;
  }
}
BENCHMARK(BM_NonconvexOracle)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_TrainingStep(benchmark::State& state) {
  const std::size_t batch = 64, n = 20;
  ad::MlpModel model = ad::MlpModel::init({{n, 128, 128, n}, 0.1, true}, 4);
  const RowMatrix x = problems::sample_uniform_params(batch, n, -1.0, 1.0, 5);
  const Tensor input = Tensor::from_eigen(x);
  std::mt19937_64 rng(6);
  for (auto _ : state) {
    ad::Tape t;
    auto bound = model.bind(t);
    const auto out = model.forward(t, bound, t.constant(input), ad::Mode::kTraining, &rng);
    benchmark::DoNotOptimize(t.backward(t.sum(t.square(out))));
  }
}
BENCHMARK(BM_TrainingStep)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
