#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "ltof/harness/evaluate.hpp"
#include "ltof/harness/experiment.hpp"
#include "ltof/harness/features.hpp"
#include "ltof/harness/pipeline.hpp"
#include "ltof/harness/shift.hpp"
#include "ltof/io.hpp"
#include "ltof/problems/nonconvex_qp.hpp"
#include "ltof/problems/toy2d.hpp"
#include "ltof/solvers/restore.hpp"

using namespace ltof;
using namespace ltof::harness;

namespace {

/// Linear proxy with identity weights: output = input.
trainers::Proxy identity_proxy(std::size_t dim) {
  trainers::Proxy p;
  p.net = ad::MlpModel::init({{dim, dim}}, 0);
  auto& w = p.net.parameters()[0];
  auto& b = p.net.parameters()[1];
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.0;
  for (std::size_t i = 0; i < dim; ++i) w.at(i, i) = 1.0;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.0;
  p.input = trainers::Standardizer::identity(dim);
  p.output = trainers::Standardizer::identity(dim);
  return p;
}

RunConfig toy_config(const std::string& out) {
  RunConfig c;
  c.problem.id = "toy2d";
  c.problem.samples = 120;
  c.features.k = {1, 2};
  c.model.hidden_width = 16;
  c.train.max_epochs = 3;
  c.train.batch_size = 32;
  c.experiment.methods = {"pdl", "two-stage"};
  c.experiment.seeds = 2;
  c.experiment.out = out;
  c.two_stage_layers = {1, 2};
  c.resolve();
  return c;
}

}  // namespace

TEST(Features, DeterministicInSeedAndDepth) {
  const RowMatrix zeta = problems::sample_uniform_params(30, 4, -1.0, 1.0, 1);
  EXPECT_EQ(gen_features(zeta, 3, 10, 5), gen_features(zeta, 3, 10, 5));
  EXPECT_NE(gen_features(zeta, 3, 10, 5), gen_features(zeta, 3, 10, 6));
  EXPECT_EQ(gen_features(zeta, 0, 10, 5), zeta);
  EXPECT_EQ(gen_features(zeta, 2, 10, 5).cols(), 10);
}

TEST(Features, DepthOneIsAffine) {
  const RowMatrix zeta = problems::sample_uniform_params(3, 2, -1.0, 1.0, 2);
  RowMatrix pts(3, 2);
  pts.row(0) = zeta.row(0);
  pts.row(1) = zeta.row(1);
  pts.row(2) = 0.5 * (zeta.row(0) + zeta.row(1));
  const RowMatrix z = gen_features(pts, 1, 6, 3);
  EXPECT_LT((z.row(2) - 0.5 * (z.row(0) + z.row(1))).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Evaluate, OracleSelfEvaluationHasZeroRegret) {
  problems::Toy2DProblem toy;
  const RowMatrix zeta = problems::sample_uniform_params(40, 2, 1.0, 2.0, 3);
  const auto cache = solvers::build_oracle_cache(toy, zeta);
  const auto r = evaluate_oracle(toy, {}, {zeta, zeta, cache.f});
  EXPECT_NEAR(r.regret_mean, 0.0, 1e-12);
  EXPECT_NEAR(r.violation_post, 0.0, 1e-12);
}

TEST(Evaluate, TwoStageWithIdentityPredictorMatchesOracle) {
  problems::Toy2DProblem toy;
  const RowMatrix zeta = problems::sample_uniform_params(40, 2, 1.0, 2.0, 4);
  const auto cache = solvers::build_oracle_cache(toy, zeta);
  const auto r = evaluate_two_stage(toy, identity_proxy(2), {}, {zeta, zeta, cache.f});
  EXPECT_NEAR(r.regret_mean, 0.0, 1e-12);
  EXPECT_NEAR(r.regret_pct_mean, 0.0, 1e-9);
}

TEST(Evaluate, ScoreOfOptimalDecisionsIsZero) {
  problems::Toy2DProblem toy;
  const RowMatrix zeta = problems::sample_uniform_params(20, 2, 1.0, 2.0, 5);
  const auto cache = solvers::build_oracle_cache(toy, zeta);
  const auto r = score(toy, cache.x, zeta, cache.f);
  EXPECT_NEAR(r.regret_mean, 0.0, 1e-9);
  EXPECT_NEAR(r.violation_pre, 0.0, 1e-12);
}

TEST(Evaluate, ResultSchemaLeadsWithTheRequiredColumns) {
  const std::vector<std::string> required = {"method", "k", "seed", "regret_mean", "regret_pct_mean",
                                             "violation_pre", "violation_post", "it_ms", "fct_ms", "et_ms",
                                             "epochs", "early_stop_epoch"};
  const auto header = result_header();
  ASSERT_GE(header.size(), required.size());
  for (std::size_t i = 0; i < required.size(); ++i) EXPECT_EQ(header[i], required[i]);
  EvalReport r;
  r.method = "pdl";
  r.k = 4;
  r.seed = 3;
  r.regret_mean = 0.1 + 0.2;
  r.epochs = 17;
  const auto back = parse_result_row(header, result_row(r));
  EXPECT_EQ(back.method, "pdl");
  EXPECT_EQ(back.k, 4u);
  EXPECT_EQ(back.regret_mean, r.regret_mean);
  EXPECT_EQ(back.epochs, 17u);
}

TEST(Evaluate, MedianAndPercentile) {
  EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.9), 9.0);
}

TEST(Aggregate, MeanOverSeedsPerMethodAndK) {
  std::vector<EvalReport> rows;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  double sum = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    EvalReport r;
    r.method = "ld";
    r.k = 2;
    r.seed = s;
    r.regret_pct_mean = u(rng);
    sum += r.regret_pct_mean;
    rows.push_back(r);
    EvalReport other = r;
    other.method = "pdl";
    rows.push_back(other);
  }
  const auto agg = aggregate(rows);
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_EQ(agg[0].method, "ld");
  EXPECT_NEAR(agg[0].regret_pct_mean, sum / 5.0, 1e-12);
}

TEST(Restore, NonconvexProjectionOnRandomPoints) {
  const auto p = problems::generate_nonconvex_instance(20, 10, 10, 11);
  solvers::Restorer r(*p);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Vector x(20);
    for (auto& v : x) v = u(rng);
    worst = std::max(worst, p->max_violation(r.restore(x).x));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(Shift, SweepEmitsEveryMagnitudeInOrder) {
  problems::Toy2DProblem toy;
  const RowMatrix zeta = problems::sample_uniform_params(30, 2, 1.0, 2.0, 8);
  const std::vector<double> mags = {0.0, 0.5, 1.0, 3.0};
  const auto curve = shift_sweep(toy, identity_proxy(2), zeta, Vector{{-1.0, -1.0}}.normalized(), 0.3, mags);
  ASSERT_EQ(curve.size(), mags.size());
  for (std::size_t i = 0; i < mags.size(); ++i) {
    EXPECT_EQ(curve[i].shift, mags[i]);
    EXPECT_TRUE(std::isfinite(curve[i].regret_mean));
  }
  const std::string csv = shift_csv(curve);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Pipeline, ProblemDataAndDatasetsAreDeterministic) {
  const auto dir = (std::filesystem::temp_directory_path() / "ltof_pipeline_test").string();
  std::filesystem::remove_all(dir);
  const RunConfig c = toy_config(dir);
  const auto a = build_problem_data(c), b = build_problem_data(c);
  EXPECT_EQ(a.zeta, b.zeta);
  EXPECT_EQ(a.oracle.f, b.oracle.f);
  const auto da = assemble_dataset(a, c, 2, 0), db = assemble_dataset(b, c, 2, 0);
  EXPECT_EQ(da.z, db.z);
  EXPECT_EQ(da.split, db.split);
  EXPECT_NE(assemble_dataset(a, c, 2, 1).split, da.split);

  bool reused = true;
  load_or_build_problem_data(c, &reused);
  EXPECT_FALSE(reused);
  const auto again = load_or_build_problem_data(c, &reused);
  EXPECT_TRUE(reused);
  EXPECT_EQ(again.zeta, a.zeta);
  std::filesystem::remove_all(dir);
}

TEST(Pipeline, MissingOracleDataIsAMissingPrerequisite) {
  const RunConfig c = toy_config((std::filesystem::temp_directory_path() / "ltof_missing_dir").string());
  EXPECT_THROW(load_problem_data(c), MissingPrerequisite);
}

TEST(Experiment, RerunReusesCellsAndIsBitIdentical) {
  const auto dir = (std::filesystem::temp_directory_path() / "ltof_experiment_test").string();
  std::filesystem::remove_all(dir);
  const RunConfig c = toy_config(dir);
  const auto first = run_experiment(c);
  EXPECT_TRUE(first.failures.empty());
  EXPECT_EQ(first.cells_run, 2u * 2u * 2u);
  const std::string results = read_file(dir + "/results.csv");
  const auto second = run_experiment(c);
  EXPECT_EQ(second.cells_reused, first.cells_run);
  EXPECT_EQ(read_file(dir + "/results.csv"), results);
  std::filesystem::remove_all(dir);
}

TEST(Experiment, ParallelWorkersMatchSerialRun) {
  const auto base = std::filesystem::temp_directory_path();
  RunConfig serial = toy_config((base / "ltof_serial").string());
  RunConfig parallel = toy_config((base / "ltof_parallel").string());
  parallel.experiment.jobs = 3;
  std::filesystem::remove_all(serial.experiment.out);
  std::filesystem::remove_all(parallel.experiment.out);
  run_experiment(serial);
  run_experiment(parallel);
  EXPECT_EQ(read_file(serial.experiment.out + "/results.csv"), read_file(parallel.experiment.out + "/results.csv"));
  std::filesystem::remove_all(serial.experiment.out);
  std::filesystem::remove_all(parallel.experiment.out);
}

TEST(Experiment, CellHashTracksTrainingInputs) {
  RunConfig c = toy_config("unused");
  const auto h = cell_hash(c, trainers::Method::kPdl, 1, 0);
  EXPECT_NE(h, cell_hash(c, trainers::Method::kPdl, 1, 1));
  EXPECT_NE(h, cell_hash(c, trainers::Method::kPdl, 2, 0));
  RunConfig jobs = c;
  jobs.experiment.jobs = 4;
  EXPECT_EQ(h, cell_hash(jobs, trainers::Method::kPdl, 1, 0));
  RunConfig lr = c;
  lr.train.learning_rate *= 2.0;
  EXPECT_NE(h, cell_hash(lr, trainers::Method::kPdl, 1, 0));
}

TEST(Report, MarkdownHasOneColumnPerK) {
  std::vector<EvalReport> agg(2);
  agg[0].method = "ld";
  agg[0].k = 1;
  agg[1].method = "ld";
  agg[1].k = 4;
  const auto md = report_markdown(agg, "t");
  EXPECT_NE(md.find("k=1"), std::string::npos);
  EXPECT_NE(md.find("k=4"), std::string::npos);
  EXPECT_NE(md.find("(*)"), std::string::npos);
}
