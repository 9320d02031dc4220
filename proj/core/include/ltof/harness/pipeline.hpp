#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "ltof/config.hpp"
#include "ltof/problems/dataset.hpp"
#include "ltof/problems/problem.hpp"
#include "ltof/solvers/oracles.hpp"

namespace ltof::harness {

/// One problem instance with its parameter samples and oracle solutions.
struct ProblemData {
  std::shared_ptr<const problems::ParametricProblem> problem;
  RowMatrix zeta;
  solvers::OracleCache oracle;
  nlohmann::json metadata = nlohmann::json::object();
};

solvers::OracleOptions oracle_options(const ProblemConfig& config);

/// Builds the problem and samples from the config. The oracle cache is
/// filled only when `solve_oracle` is set.
ProblemData build_problem_data(const RunConfig& config, bool solve_oracle = true);

/// Hash of everything that determines ProblemData.
std::string problem_hash(const RunConfig& config);

/// Reuses `<out>/data/oracle.*` when its hash matches, otherwise builds and
/// persists it.
ProblemData load_or_build_problem_data(const RunConfig& config, bool* reused = nullptr);

/// Loads the persisted oracle data; throws MissingPrerequisite when absent
/// or stale.
ProblemData load_problem_data(const RunConfig& config);

/// Seed of the feature generator for depth k (fixed across run seeds).
std::uint64_t feature_seed(const FeaturesConfig& config, std::size_t k);

/// z = G^k(zeta) paired with zeta, the oracle cache and a split drawn from
/// `split_seed`. Precomputed `features` skip the generator.
problems::PtoDataset assemble_dataset(const ProblemData& data, const RunConfig& config, std::size_t k,
                                      std::uint64_t split_seed, const RowMatrix* features = nullptr);

std::string data_dir(const RunConfig& config);
std::string dataset_csv_path(const RunConfig& config, std::size_t k);
std::string dataset_meta_path(const RunConfig& config, std::size_t k);

}  // namespace ltof::harness
