#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ltof/config.hpp"
#include "ltof/harness/evaluate.hpp"
#include "ltof/harness/pipeline.hpp"
#include "ltof/trainers/trainers.hpp"

namespace ltof::harness {

/// A trained network with its training history. Names: the method id for
/// LtOF, "two-stage-m<m>" per baseline depth, "epo-proxy" and "epo-frozen".
struct ModelArtifact {
  std::string name;
  trainers::Proxy proxy;
  trainers::TrainHistory history;
};

struct TrainedCell {
  trainers::Method method = trainers::Method::kLd;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<ModelArtifact> models;

  const ModelArtifact& model(const std::string& name) const;
};

/// Shared read-only state of one experiment: config, problem data, feature
/// matrices per k and the frozen EPO proxies per seed. Safe to use from
/// several worker threads.
class ExperimentContext {
 public:
  ExperimentContext(RunConfig config, ProblemData data);

  const RunConfig& config() const { return config_; }
  const ProblemData& data() const { return data_; }
  const problems::ParametricProblem& problem() const { return *data_.problem; }

  /// Features for depth k with the split drawn from `seed`.
  problems::PtoDataset dataset(std::size_t k, std::uint64_t seed);
  /// LtO proxy on zeta inputs, trained once per seed.
  std::shared_ptr<const ModelArtifact> frozen_proxy(std::uint64_t seed);

 private:
  RunConfig config_;
  ProblemData data_;
  std::mutex mutex_;
  std::map<std::size_t, std::shared_ptr<const RowMatrix>> features_;
  std::map<std::uint64_t, std::shared_ptr<std::once_flag>> frozen_once_;
  std::map<std::uint64_t, std::shared_ptr<const ModelArtifact>> frozen_;
};

TrainedCell train_cell(ExperimentContext& context, trainers::Method method, std::size_t k, std::uint64_t seed);

/// Result rows of a cell. Two-stage cells yield one row per depth plus a
/// "two-stage" row holding the depth with the lowest stop metric on test.
std::vector<EvalReport> evaluate_cell(ExperimentContext& context, const TrainedCell& cell);

std::string cell_dir(const RunConfig& config, trainers::Method method, std::size_t k, std::uint64_t seed);
/// Hash of everything that determines the cell's trained models and rows.
std::string cell_hash(const RunConfig& config, trainers::Method method, std::size_t k, std::uint64_t seed);

/// Writes checkpoints, histories and cell.json (with `hash`) into `dir`.
void save_cell(const TrainedCell& cell, const std::string& dir, const std::string& hash);
/// Throws MissingPrerequisite when the directory or a checkpoint is absent.
TrainedCell load_cell(const std::string& dir, const problems::ParametricProblem& problem);
/// Hash recorded in `dir`/cell.json, or empty.
std::string stored_cell_hash(const std::string& dir);

void save_cell_results(const std::vector<EvalReport>& rows, const std::string& dir, const std::string& hash);
/// Rows of `dir`/result.csv when its recorded hash equals `hash`.
std::optional<std::vector<EvalReport>> load_cell_results(const std::string& dir, const std::string& hash);

struct ExperimentSummary {
  std::vector<EvalReport> rows;
  std::vector<EvalReport> aggregates;
  std::vector<std::string> failures;
  std::size_t cells_run = 0;
  std::size_t cells_reused = 0;
  bool diverged = false;
};

using LogFn = std::function<void(const std::string&)>;

/// Runs every (method, k, seed) cell on a work queue of `experiment.jobs`
/// threads, reusing cells whose hash matches, then writes results.csv,
/// regret_vs_k.csv and effective_config.toml under `experiment.out`.
ExperimentSummary run_experiment(const RunConfig& config, const LogFn& log = {});

/// Per (method, k) mean over seeds, in first-appearance order.
std::vector<EvalReport> aggregate(const std::vector<EvalReport>& rows);

/// Seed rows followed by aggregate rows whose seed column reads "mean".
std::string results_csv(const std::vector<EvalReport>& rows, const std::vector<EvalReport>& aggregates);
/// Rows of a results CSV; aggregate rows are returned separately.
void read_results_csv(const std::string& path, std::vector<EvalReport>& rows, std::vector<EvalReport>& aggregates);

/// method,k,regret_mean,regret_pct_mean,regret_pct_pre_mean from aggregate rows.
std::string regret_vs_k_csv(const std::vector<EvalReport>& aggregates);

/// Methods x k markdown table: regret, "(*)" before-restoration regret,
/// violation after restoration and "(*)" violation before restoration.
std::string report_markdown(const std::vector<EvalReport>& aggregates, const std::string& title);

}  // namespace ltof::harness
