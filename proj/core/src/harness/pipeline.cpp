#include "ltof/harness/pipeline.hpp"

#include <filesystem>

#include "ltof/harness/features.hpp"
#include "ltof/io.hpp"
#include "ltof/problems/nonconvex_qp.hpp"
#include "ltof/problems/portfolio.hpp"
#include "ltof/problems/toy2d.hpp"

namespace ltof::harness {

namespace {

constexpr int kDataFormat = 1;

std::string oracle_csv_path(const RunConfig& config) { return data_dir(config) + "/oracle.csv"; }
std::string oracle_meta_path(const RunConfig& config) { return data_dir(config) + "/oracle.meta.json"; }

/// Config text restricted to the [problem] block.
std::string problem_text(const RunConfig& config) {
  const std::string full = config.to_toml();
  const auto begin = full.find("[problem]");
  const auto end = full.find("[features]");
  std::string text = full.substr(begin, end - begin);
  if (config.problem.id == "toy2d") {
    text += "toy2d_range = " + format_double(config.shift.low) + " " + format_double(config.shift.high) + "\n";
  }
  return text;
}

}  // namespace

solvers::OracleOptions oracle_options(const ProblemConfig& config) {
  solvers::OracleOptions options;
  options.tol = config.oracle_tol;
  options.restarts = config.oracle_restarts;
  options.seed = config.seed;
  return options;
}

ProblemData build_problem_data(const RunConfig& config, bool solve_oracle) {
  const auto& p = config.problem;
  ProblemData out;
  out.metadata["problem"] = p.id;
  out.metadata["problem_seed"] = p.seed;
  if (p.id == "portfolio") {
    problems::PortfolioDataConfig pc;
    pc.assets = p.assets;
    pc.factors = p.factors;
    pc.samples = p.samples;
    pc.periods = p.periods;
    pc.persistence = p.persistence;
    pc.noise_std = p.noise_std;
    pc.alpha = p.alpha;
    pc.risk_weight = p.risk_weight;
    pc.seed = p.seed;
    auto data = problems::generate_portfolio_data(pc);
    out.problem = data.problem;
    out.zeta = std::move(data.zetas);
  } else if (p.id == "nonconvex_qp") {
    out.problem = problems::generate_nonconvex_instance(p.n, p.n_eq, p.n_ineq, p.seed);
    out.zeta = problems::sample_uniform_params(p.samples, p.n, p.param_low, p.param_high,
                                               solvers::mix_seed(p.seed, 1));
    out.metadata["rhs_construction"] = "b = A x0, h = G x0 + slack (feasible by construction)";
  } else if (p.id == "toy2d") {
    out.problem = std::make_shared<problems::Toy2DProblem>();
    out.zeta = problems::sample_uniform_params(p.samples, 2, config.shift.low, config.shift.high,
                                               solvers::mix_seed(p.seed, 1));
  } else {
    throw ConfigError("unknown problem id '" + p.id + "'");
  }
  if (solve_oracle) {
    out.oracle = solvers::build_oracle_cache(*out.problem, out.zeta, oracle_options(p));
    out.metadata["oracle"] = out.oracle.meta;
  }
  return out;
}

std::string problem_hash(const RunConfig& config) {
  return content_hash("data-format " + std::to_string(kDataFormat) + "\n" + problem_text(config));
}

std::string data_dir(const RunConfig& config) { return config.experiment.out + "/data"; }

std::string dataset_csv_path(const RunConfig& config, std::size_t k) {
  return data_dir(config) + "/dataset_k" + std::to_string(k) + ".csv";
}

std::string dataset_meta_path(const RunConfig& config, std::size_t k) {
  return data_dir(config) + "/dataset_k" + std::to_string(k) + ".meta.json";
}

ProblemData load_problem_data(const RunConfig& config) {
  const std::string csv = oracle_csv_path(config);
  const std::string meta = oracle_meta_path(config);
  if (!std::filesystem::exists(csv) || !std::filesystem::exists(meta)) {
    throw MissingPrerequisite("oracle cache not found at " + csv + "; run `ltof gen` first");
  }
  const auto stored = problems::load_dataset(csv, meta);
  if (stored.metadata.value("problem_hash", std::string()) != problem_hash(config)) {
    throw MissingPrerequisite("oracle cache at " + csv + " was built from a different [problem] block");
  }
  if (!stored.has_oracle()) throw MissingPrerequisite("oracle cache at " + csv + " lacks solutions");
  ProblemData out = build_problem_data(config, false);
  out.zeta = stored.zeta;
  out.oracle.x = *stored.xstar;
  out.oracle.f = stored.fstar;
  out.oracle.meta = stored.metadata.value("oracle", nlohmann::json::object());
  out.metadata = stored.metadata;
  return out;
}

ProblemData load_or_build_problem_data(const RunConfig& config, bool* reused) {
  try {
    ProblemData out = load_problem_data(config);
    if (reused) *reused = true;
    return out;
  } catch (const MissingPrerequisite&) {
  }
  if (reused) *reused = false;
  ProblemData out = build_problem_data(config, true);
  out.metadata["problem_hash"] = problem_hash(config);
  problems::PtoDataset stored;
  stored.z = RowMatrix(out.zeta.rows(), 0);
  stored.zeta = out.zeta;
  stored.xstar = out.oracle.x;
  stored.fstar = out.oracle.f;
  stored.split = problems::make_split(static_cast<std::size_t>(out.zeta.rows()), config.problem.train_ratio,
                                      config.problem.seed);
  stored.metadata = out.metadata;
  problems::save_dataset(stored, oracle_csv_path(config), oracle_meta_path(config));
  return out;
}

std::uint64_t feature_seed(const FeaturesConfig& config, std::size_t k) {
  return solvers::mix_seed(config.seed, k);
}

problems::PtoDataset assemble_dataset(const ProblemData& data, const RunConfig& config, std::size_t k,
                                      std::uint64_t split_seed, const RowMatrix* features) {
  problems::PtoDataset out;
  out.zeta = data.zeta;
  out.z = features ? *features
                   : gen_features(data.zeta, k, config.feature_width(), feature_seed(config.features, k),
                                  config.features.hidden);
  if (data.oracle.x.rows() == data.zeta.rows()) {
    out.xstar = data.oracle.x;
    out.fstar = data.oracle.f;
  }
  out.split = problems::make_split(out.size(), config.problem.train_ratio, split_seed);
  out.metadata = data.metadata;
  out.metadata["k"] = k;
  out.metadata["feature_width"] = config.feature_width();
  out.metadata["feature_hidden"] = config.features.hidden;
  out.metadata["feature_seed"] = feature_seed(config.features, k);
  out.metadata["split_seed"] = split_seed;
  out.metadata["train_ratio"] = config.problem.train_ratio;
  return out;
}

}  // namespace ltof::harness
