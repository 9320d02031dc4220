#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ltof/autodiff/adam.hpp"
#include "ltof/config.hpp"
#include "ltof/harness/evaluate.hpp"
#include "ltof/harness/experiment.hpp"
#include "ltof/harness/pipeline.hpp"
#include "ltof/harness/shift.hpp"
#include "ltof/io.hpp"

namespace {

enum ExitCode { kOk = 0, kIo = 1, kConfig = 2, kDivergence = 3, kMissing = 4 };

struct Options {
  std::string config;
  std::string method;
  std::optional<std::size_t> k;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string out;
  bool paper_scale = false;
  bool dc3_eq_mode = false;
};

/// Loads the config and applies, in order: --paper-scale, LTOF_SEED, flags.
ltof::RunConfig load_config(const Options& o, bool need_config = true) {
  ltof::RunConfig config;
  if (!o.config.empty()) {
    config = ltof::RunConfig::load(o.config);
  } else if (need_config) {
    throw ltof::ConfigError("--config is required");
  }
  if (o.paper_scale) config.apply_paper_scale();
  if (const char* env = std::getenv("LTOF_SEED")) {
    try {
      config.experiment.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ltof::ConfigError(std::string("LTOF_SEED must be a non-negative integer, got '") + env + "'");
    }
  }
  if (o.seed) config.experiment.seed = *o.seed;
  if (o.jobs) config.experiment.jobs = *o.jobs;
  if (!o.out.empty()) config.experiment.out = o.out;
  if (o.dc3_eq_mode) config.dc3_eq_mode = true;
  if (!o.method.empty()) config.experiment.methods = {o.method};
  if (o.k) config.features.k = {*o.k};
  config.resolve();
  return config;
}

void persist_config(const ltof::RunConfig& config) {
  ltof::write_file_atomic(config.experiment.out + "/effective_config.toml", config.to_toml());
}

int cmd_gen(const Options& o) {
  const auto config = load_config(o);
  persist_config(config);
  bool reused = false;
  const auto data = ltof::harness::load_or_build_problem_data(config, &reused);
  std::string combined;
  for (std::size_t k : config.features.k) {
    const auto dataset = ltof::harness::assemble_dataset(data, config, k, config.experiment.seed);
    const std::string csv = ltof::harness::dataset_csv_path(config, k);
    const std::string meta = ltof::harness::dataset_meta_path(config, k);
    ltof::problems::save_dataset(dataset, csv, meta);
    combined += ltof::read_file(csv) + ltof::read_file(meta);
  }
  std::cout << "dataset " << ltof::harness::data_dir(config) << " samples=" << data.zeta.rows()
            << " oracle=" << (reused ? "reused" : "built") << " hash=" << ltof::content_hash(combined) << "\n";
  return kOk;
}

std::size_t single_k(const Options& o, const ltof::RunConfig& config) {
  if (o.k) return *o.k;
  return config.features.k.front();
}

int cmd_train(const Options& o) {
  if (o.method.empty()) throw ltof::ConfigError("--method is required");
  const auto config = load_config(o);
  const auto method = ltof::trainers::parse_method(o.method);
  const std::size_t k = single_k(o, config);
  const std::uint64_t seed = config.experiment.seed;
  auto data = ltof::harness::load_problem_data(config);
  ltof::harness::ExperimentContext context(config, std::move(data));
  const std::string dir = ltof::harness::cell_dir(config, method, k, seed);
  const std::string hash = ltof::harness::cell_hash(config, method, k, seed);
  persist_config(config);
  if (ltof::harness::stored_cell_hash(dir) == hash) {
    std::cout << "trained " << o.method << " k=" << k << " seed=" << seed << " up to date (" << dir << ")\n";
    return kOk;
  }
  const auto cell = ltof::harness::train_cell(context, method, k, seed);
  ltof::harness::save_cell(cell, dir, hash);
  ltof::write_file_atomic(dir + "/effective_config.toml", config.to_toml());
  for (const auto& m : cell.models) {
    const auto& h = m.history;
    const auto& best = h.epochs.at(h.best_epoch - 1);
    std::cout << "trained " << m.name << " k=" << k << " seed=" << seed << " epochs=" << h.epochs.size()
              << " best_epoch=" << h.best_epoch << " test_metric=" << ltof::format_double(best.test_metric)
              << " checkpoint=" << dir << "\n";
  }
  return kOk;
}

void print_rows(const std::vector<ltof::harness::EvalReport>& rows) {
  ltof::CsvTable table;
  table.header = ltof::harness::result_header();
  for (const auto& r : rows) table.rows.push_back(ltof::harness::result_row(r));
  std::cout << ltof::to_csv(table);
}

int cmd_eval(const Options& o) {
  if (o.method.empty()) throw ltof::ConfigError("--method is required");
  const auto config = load_config(o);
  const auto method = ltof::trainers::parse_method(o.method);
  const std::size_t k = single_k(o, config);
  const std::uint64_t seed = config.experiment.seed;
  const std::string dir = ltof::harness::cell_dir(config, method, k, seed);
  const std::string hash = ltof::harness::cell_hash(config, method, k, seed);
  try {
    if (auto cached = ltof::harness::load_cell_results(dir, hash)) {
      print_rows(*cached);
      return kOk;
    }
    auto data = ltof::harness::load_problem_data(config);
    ltof::harness::ExperimentContext context(config, std::move(data));
    if (ltof::harness::stored_cell_hash(dir) != hash) {
      throw ltof::MissingPrerequisite("no checkpoint for this config at " + dir + "; run `ltof train` first");
    }
    const auto cell = ltof::harness::load_cell(dir, context.problem());
    const auto rows = ltof::harness::evaluate_cell(context, cell);
    ltof::harness::save_cell_results(rows, dir, hash);
    print_rows(rows);
  } catch (const ltof::MissingPrerequisite& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kOk;
}

int cmd_sweep(const Options& o) {
  const auto config = load_config(o);
  const auto summary = ltof::harness::run_experiment(config, [](const std::string& line) {
    std::cerr << line << "\n";
  });
  std::cout << "cells run=" << summary.cells_run << " reused=" << summary.cells_reused
            << " failed=" << summary.failures.size() << " results=" << config.experiment.out << "/results.csv\n";
  for (const auto& f : summary.failures) std::cerr << "failed: " << f << "\n";
  if (summary.diverged) return kDivergence;
  return summary.failures.empty() ? kOk : kIo;
}

int cmd_shift(const Options& o) {
  const auto config = load_config(o);
  const std::uint64_t seed = config.experiment.seed;
  const std::string dir = config.experiment.out + "/shift";
  ltof::RunConfig hashed = config;
  hashed.experiment = ltof::ExperimentConfig{};
  hashed.problem = ltof::ProblemConfig{};
  hashed.features = ltof::FeaturesConfig{};
  const std::string hash =
      ltof::content_hash("shift seed " + std::to_string(seed) + "\n" + hashed.to_toml());
  const std::string csv = dir + "/shift_s" + std::to_string(seed) + ".csv";
  const std::string stamp = csv + ".hash";
  if (std::filesystem::exists(csv) && std::filesystem::exists(stamp) && ltof::read_file(stamp) == hash + "\n") {
    std::cout << ltof::read_file(csv);
    return kOk;
  }
  const auto run = ltof::harness::run_toy2d_shift(config, seed);
  const std::string text = ltof::harness::shift_csv(run.curve);
  ltof::trainers::save_proxy(run.proxy, dir + "/proxy_s" + std::to_string(seed) + ".json");
  ltof::write_file_atomic(dir + "/history_s" + std::to_string(seed) + ".csv", run.history.to_csv());
  ltof::write_file_atomic(dir + "/effective_config.toml", config.to_toml());
  ltof::write_file_atomic(csv, text);
  ltof::write_file_atomic(stamp, hash + "\n");
  std::cout << text;
  return kOk;
}

int cmd_report(const Options& o) {
  Options relaxed = o;
  const auto config = load_config(relaxed, false);
  const std::string results = config.experiment.out + "/results.csv";
  std::vector<ltof::harness::EvalReport> rows;
  std::vector<ltof::harness::EvalReport> aggregates;
  ltof::harness::read_results_csv(results, rows, aggregates);
  if (aggregates.empty()) aggregates = ltof::harness::aggregate(rows);
  const std::string title = "Regret and constraint violations, " + config.problem.id;
  const std::string md = ltof::harness::report_markdown(aggregates, title);
  ltof::write_file_atomic(config.experiment.out + "/report.md", md);
  ltof::write_file_atomic(config.experiment.out + "/regret_vs_k.csv", ltof::harness::regret_vs_k_csv(aggregates));
  std::cout << md;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning to optimize from features: data generation, training, evaluation and reports"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run config (TOML-like)");
    sub->add_flag("--paper-scale", o.paper_scale, "Use paper-scale problem and model sizes");
    sub->add_option("--out", o.out, "Output directory (overrides experiment.out)");
    sub->add_option("--seed", o.seed, "Run seed (overrides LTOF_SEED and experiment.seed)");
    sub->add_flag("--dc3-eq-mode", o.dc3_eq_mode, "Allow DC3 on the portfolio with 1^T x = 1 as equality");
  };
  auto add_cell = [&](CLI::App* sub) {
    sub->add_option("--method", o.method, "ld, pdl, dc3, two-stage or epo-proxy");
    sub->add_option("--k", o.k, "Feature generator depth");
  };

  auto* gen = app.add_subcommand("gen", "Generate parameters, oracle solutions and features");
  add_common(gen);
  auto* train = app.add_subcommand("train", "Train one (method, k, seed) cell");
  add_common(train);
  add_cell(train);
  auto* eval = app.add_subcommand("eval", "Evaluate a trained cell on its test split");
  add_common(eval);
  add_cell(eval);
  auto* sweep = app.add_subcommand("sweep", "Run every (method, k, seed) cell of the config");
  add_common(sweep);
  add_cell(sweep);
  sweep->add_option("--jobs", o.jobs, "Parallel cells");
  auto* shift = app.add_subcommand("shift", "Toy2D distribution-shift curve of a pretrained proxy");
  add_common(shift);
  auto* report = app.add_subcommand("report", "Markdown table from results.csv");
  add_common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*sweep) return cmd_sweep(o);
    if (*shift) return cmd_shift(o);
    if (*report) return cmd_report(o);
  } catch (const ltof::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ltof::ad::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const ltof::MissingPrerequisite& e) {
    std::cerr << "missing prerequisite: " << e.what() << "\n";
    return kMissing;
  } catch (const ltof::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kOk;
}
