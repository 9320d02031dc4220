#include "ltof/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <sstream>
#include <thread>

#include "ltof/autodiff/adam.hpp"
#include "ltof/io.hpp"

namespace ltof::harness {

namespace {

constexpr int kCellFormat = 1;

std::string cell_name(trainers::Method method, std::size_t k, std::uint64_t seed) {
  return trainers::to_string(method) + "_k" + std::to_string(k) + "_s" + std::to_string(seed);
}

trainers::TrainOptions train_options(const RunConfig& config, std::uint64_t seed) {
  trainers::TrainOptions t = config.train;
  t.seed = seed;
  return t;
}

double stop_value(const EvalReport& r, trainers::StopMetric metric) {
  return metric == trainers::StopMetric::kRegretPct ? r.regret_pct_mean : r.regret_mean;
}

EvalOptions eval_options(const RunConfig& config) {
  return {config.experiment.measure_timing, config.experiment.timing_samples};
}

void stamp(EvalReport& r, const std::string& method, const TrainedCell& cell, const trainers::TrainHistory& h) {
  r.method = method;
  r.k = cell.k;
  r.seed = cell.seed;
  r.epochs = h.epochs.size();
  r.early_stop_epoch = h.early_stop_epoch;
}

std::string history_file(const std::string& name) { return "history_" + name + ".csv"; }
std::string checkpoint_file(const std::string& name) { return "checkpoint_" + name + ".json"; }

}  // namespace

const ModelArtifact& TrainedCell::model(const std::string& name) const {
  for (const auto& m : models) {
    if (m.name == name) return m;
  }
  throw MissingPrerequisite("cell " + trainers::to_string(method) + " k=" + std::to_string(k) + " seed=" +
                            std::to_string(seed) + " has no model '" + name + "'");
}

ExperimentContext::ExperimentContext(RunConfig config, ProblemData data)
    : config_(std::move(config)), data_(std::move(data)) {
  if (data_.oracle.x.rows() != data_.zeta.rows()) {
    throw MissingPrerequisite("experiment needs oracle solutions for every sample");
  }
}

problems::PtoDataset ExperimentContext::dataset(std::size_t k, std::uint64_t seed) {
  std::shared_ptr<const RowMatrix> z;
  {
    std::lock_guard lock(mutex_);
    auto it = features_.find(k);
    if (it != features_.end()) z = it->second;
  }
  problems::PtoDataset out = assemble_dataset(data_, config_, k, seed, z.get());
  if (!z) {
    std::lock_guard lock(mutex_);
    features_.emplace(k, std::make_shared<const RowMatrix>(out.z));
  }
  return out;
}

std::shared_ptr<const ModelArtifact> ExperimentContext::frozen_proxy(std::uint64_t seed) {
  std::shared_ptr<std::once_flag> flag;
  {
    std::lock_guard lock(mutex_);
    auto& slot = frozen_once_[seed];
    if (!slot) slot = std::make_shared<std::once_flag>();
    flag = slot;
  }
  std::call_once(*flag, [&] {
    const problems::PtoDataset data = assemble_dataset(data_, config_, 1, seed);
    const auto set = trainers::make_training_set(data_.problem, data, true);
    const auto method = trainers::parse_method(config_.experiment.epo_proxy_method);
    auto result = trainers::pretrain_proxy(method, set, config_.model, train_options(config_, seed),
                                           config_.methods);
    auto artifact = std::make_shared<const ModelArtifact>(
        ModelArtifact{"epo-frozen", std::move(result.proxy), std::move(result.history)});
    std::lock_guard lock(mutex_);
    frozen_[seed] = artifact;
  });
  std::lock_guard lock(mutex_);
  return frozen_.at(seed);
}

TrainedCell train_cell(ExperimentContext& context, trainers::Method method, std::size_t k, std::uint64_t seed) {
  const RunConfig& config = context.config();
  const problems::PtoDataset data = context.dataset(k, seed);
  const auto set = trainers::make_training_set(context.data().problem, data);
  const auto train = train_options(config, seed);
  TrainedCell cell{method, k, seed, {}};
  switch (method) {
    case trainers::Method::kLd:
    case trainers::Method::kPdl:
    case trainers::Method::kDc3: {
      auto r = trainers::train_ltof(method, set, config.model, train, config.methods);
      cell.models.push_back({trainers::to_string(method), std::move(r.proxy), std::move(r.history)});
      break;
    }
    case trainers::Method::kTwoStage:
      for (std::size_t m : config.two_stage_layers) {
        trainers::TwoStageOptions options;
        options.layers = m;
        auto r = trainers::train_two_stage(set, config.model, train, options);
        cell.models.push_back({"two-stage-m" + std::to_string(m), std::move(r.proxy), std::move(r.history)});
      }
      break;
    case trainers::Method::kEpoProxy: {
      const auto frozen = context.frozen_proxy(seed);
      auto r = trainers::train_epo_with_frozen_proxy(set, frozen->proxy, config.model, train, config.methods.epo);
      cell.models.push_back({"epo-proxy", std::move(r.proxy), std::move(r.history)});
      cell.models.push_back(*frozen);
      break;
    }
  }
  return cell;
}

std::vector<EvalReport> evaluate_cell(ExperimentContext& context, const TrainedCell& cell) {
  const RunConfig& config = context.config();
  const problems::PtoDataset data = context.dataset(cell.k, cell.seed);
  const auto set = trainers::make_training_set(context.data().problem, data);
  const EvalSplit split{set.z_test, set.zeta_test, set.fstar_test};
  const auto& problem = context.problem();
  const EvalOptions options = eval_options(config);
  std::vector<EvalReport> rows;
  switch (cell.method) {
    case trainers::Method::kLd:
    case trainers::Method::kPdl:
    case trainers::Method::kDc3: {
      const auto& m = cell.model(trainers::to_string(cell.method));
      EvalReport r = evaluate_proxy(problem, m.proxy, split, options);
      stamp(r, m.name, cell, m.history);
      rows.push_back(r);
      break;
    }
    case trainers::Method::kTwoStage: {
      const auto oracle = oracle_options(config.problem);
      std::size_t best = 0;
      for (const auto& m : cell.models) {
        EvalReport r = evaluate_two_stage(problem, m.proxy, oracle, split, options);
        stamp(r, m.name, cell, m.history);
        rows.push_back(r);
        if (stop_value(r, config.train.stop_metric) < stop_value(rows[best], config.train.stop_metric)) {
          best = rows.size() - 1;
        }
      }
      EvalReport chosen = rows.at(best);
      chosen.method = "two-stage";
      rows.push_back(chosen);
      break;
    }
    case trainers::Method::kEpoProxy: {
      const auto& m = cell.model("epo-proxy");
      EvalReport r = evaluate_epo(problem, m.proxy, cell.model("epo-frozen").proxy, split, options);
      stamp(r, m.name, cell, m.history);
      rows.push_back(r);
      break;
    }
  }
  return rows;
}

std::string cell_dir(const RunConfig& config, trainers::Method method, std::size_t k, std::uint64_t seed) {
  return config.experiment.out + "/cells/" + cell_name(method, k, seed);
}

std::string cell_hash(const RunConfig& config, trainers::Method method, std::size_t k, std::uint64_t seed) {
  RunConfig c = config;
  // Fields that choose which cells run, or where, do not change a cell.
  c.experiment.methods.clear();
  c.experiment.seeds = 1;
  c.experiment.seed = 0;
  c.experiment.out.clear();
  c.experiment.jobs = 1;
  c.features.k.clear();
  c.shift = ShiftConfig{};
  if (method != trainers::Method::kTwoStage) c.two_stage_layers.clear();
  std::ostringstream text;
  text << "cell-format " << kCellFormat << "\n"
       << "method " << trainers::to_string(method) << "\nk " << k << "\nseed " << seed << "\n"
       << c.to_toml();
  return content_hash(text.str());
}

void save_cell(const TrainedCell& cell, const std::string& dir, const std::string& hash) {
  nlohmann::json doc;
  doc["method"] = trainers::to_string(cell.method);
  doc["k"] = cell.k;
  doc["seed"] = cell.seed;
  doc["hash"] = hash;
  doc["models"] = nlohmann::json::array();
  for (const auto& m : cell.models) {
    trainers::save_proxy(m.proxy, dir + "/" + checkpoint_file(m.name));
    write_file_atomic(dir + "/" + history_file(m.name), m.history.to_csv());
    doc["models"].push_back({{"name", m.name},
                             {"epochs", m.history.epochs.size()},
                             {"best_epoch", m.history.best_epoch},
                             {"early_stop_epoch", m.history.early_stop_epoch}});
  }
  write_file_atomic(dir + "/cell.json", doc.dump(1) + "\n");
}

std::string stored_cell_hash(const std::string& dir) {
  const std::string path = dir + "/cell.json";
  if (!std::filesystem::exists(path)) return "";
  try {
    return nlohmann::json::parse(read_file(path)).value("hash", std::string());
  } catch (const nlohmann::json::exception&) {
    return "";
  }
}

TrainedCell load_cell(const std::string& dir, const problems::ParametricProblem& problem) {
  const std::string path = dir + "/cell.json";
  if (!std::filesystem::exists(path)) throw MissingPrerequisite("no trained cell at " + dir + "; run `ltof train`");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse " + path + ": " + e.what());
  }
  TrainedCell cell;
  cell.method = trainers::parse_method(doc.at("method").get<std::string>());
  cell.k = doc.at("k").get<std::size_t>();
  cell.seed = doc.at("seed").get<std::uint64_t>();
  for (const auto& entry : doc.at("models")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::string ckpt = dir + "/" + checkpoint_file(name);
    if (!std::filesystem::exists(ckpt)) throw MissingPrerequisite("missing checkpoint " + ckpt);
    ModelArtifact m{name, trainers::load_proxy(ckpt, &problem.constraints()), {}};
    // Only the counters are needed for result rows.
    m.history.epochs.resize(entry.at("epochs").get<std::size_t>());
    m.history.best_epoch = entry.at("best_epoch").get<std::size_t>();
    m.history.early_stop_epoch = entry.at("early_stop_epoch").get<std::size_t>();
    cell.models.push_back(std::move(m));
  }
  return cell;
}

void save_cell_results(const std::vector<EvalReport>& rows, const std::string& dir, const std::string& hash) {
  write_file_atomic(dir + "/result.csv", results_csv(rows, {}));
  write_file_atomic(dir + "/result.hash", hash + "\n");
}

std::optional<std::vector<EvalReport>> load_cell_results(const std::string& dir, const std::string& hash) {
  const std::string csv = dir + "/result.csv";
  const std::string stamp_path = dir + "/result.hash";
  if (!std::filesystem::exists(csv) || !std::filesystem::exists(stamp_path)) return std::nullopt;
  if (read_file(stamp_path) != hash + "\n") return std::nullopt;
  std::vector<EvalReport> rows;
  std::vector<EvalReport> aggregates;
  read_results_csv(csv, rows, aggregates);
  return rows;
}

ExperimentSummary run_experiment(const RunConfig& config, const LogFn& log) {
  struct Cell {
    trainers::Method method;
    std::size_t k;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (auto method : config.method_list()) {
    for (std::size_t k : config.features.k) {
      for (std::uint64_t seed : config.seed_list()) cells.push_back({method, k, seed});
    }
  }

  std::mutex log_mutex;
  auto say = [&](const std::string& line) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    log(line);
  };

  write_file_atomic(config.experiment.out + "/effective_config.toml", config.to_toml());
  bool reused = false;
  ProblemData data = load_or_build_problem_data(config, &reused);
  say(reused ? "oracle cache reused" : "oracle cache built");
  ExperimentContext context(config, std::move(data));

  std::vector<std::vector<EvalReport>> results(cells.size());
  std::vector<std::string> errors(cells.size());
  std::vector<char> diverged(cells.size(), 0);
  std::vector<char> reused_cell(cells.size(), 0);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& c = cells[i];
      const std::string name = cell_name(c.method, c.k, c.seed);
      const std::string dir = cell_dir(config, c.method, c.k, c.seed);
      const std::string hash = cell_hash(config, c.method, c.k, c.seed);
      try {
        if (auto cached = load_cell_results(dir, hash)) {
          results[i] = std::move(*cached);
          reused_cell[i] = 1;
          say(name + ": reused");
          continue;
        }
        const TrainedCell trained = stored_cell_hash(dir) == hash ? load_cell(dir, context.problem())
                                                                  : train_cell(context, c.method, c.k, c.seed);
        if (stored_cell_hash(dir) != hash) save_cell(trained, dir, hash);
        results[i] = evaluate_cell(context, trained);
        save_cell_results(results[i], dir, hash);
        say(name + ": regret_pct " + format_double(results[i].back().regret_pct_mean));
      } catch (const ad::DivergenceError& e) {
        diverged[i] = 1;
        errors[i] = name + ": diverged: " + e.what();
        say(errors[i]);
      } catch (const std::exception& e) {
        errors[i] = name + ": " + e.what();
        say(errors[i]);
      }
    }
  };

  const std::size_t threads = std::min(config.experiment.jobs, std::max<std::size_t>(cells.size(), 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentSummary summary;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (auto& r : results[i]) summary.rows.push_back(std::move(r));
    if (!errors[i].empty()) summary.failures.push_back(errors[i]);
    summary.diverged = summary.diverged || diverged[i];
    if (errors[i].empty()) (reused_cell[i] ? summary.cells_reused : summary.cells_run) += 1;
  }
  summary.aggregates = aggregate(summary.rows);
  write_file_atomic(config.experiment.out + "/results.csv", results_csv(summary.rows, summary.aggregates));
  write_file_atomic(config.experiment.out + "/regret_vs_k.csv", regret_vs_k_csv(summary.aggregates));
  return summary;
}

std::vector<EvalReport> aggregate(const std::vector<EvalReport>& rows) {
  std::vector<EvalReport> out;
  std::vector<std::size_t> counts;
  std::vector<double> epochs;
  std::vector<double> early;
  for (const auto& r : rows) {
    std::size_t slot = out.size();
    for (std::size_t j = 0; j < out.size(); ++j) {
      if (out[j].method == r.method && out[j].k == r.k) slot = j;
    }
    if (slot == out.size()) {
      EvalReport fresh;
      fresh.method = r.method;
      fresh.k = r.k;
      out.push_back(fresh);
      counts.push_back(0);
      epochs.push_back(0.0);
      early.push_back(0.0);
    }
    EvalReport& a = out[slot];
    counts[slot] += 1;
    a.regret_mean += r.regret_mean;
    a.regret_pct_mean += r.regret_pct_mean;
    a.violation_pre += r.violation_pre;
    a.violation_post += r.violation_post;
    a.it_ms += r.it_ms;
    a.fct_ms += r.fct_ms;
    a.et_ms += r.et_ms;
    a.regret_pct_pre_mean += r.regret_pct_pre_mean;
    a.regret_p90 += r.regret_p90;
    epochs[slot] += static_cast<double>(r.epochs);
    early[slot] += static_cast<double>(r.early_stop_epoch);
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto n = static_cast<double>(counts[j]);
    EvalReport& a = out[j];
    a.regret_mean /= n;
    a.regret_pct_mean /= n;
    a.violation_pre /= n;
    a.violation_post /= n;
    a.it_ms /= n;
    a.fct_ms /= n;
    a.et_ms /= n;
    a.regret_pct_pre_mean /= n;
    a.regret_p90 /= n;
    a.epochs = static_cast<std::size_t>(std::llround(epochs[j] / n));
    a.early_stop_epoch = static_cast<std::size_t>(std::llround(early[j] / n));
  }
  return out;
}

std::string results_csv(const std::vector<EvalReport>& rows, const std::vector<EvalReport>& aggregates) {
  CsvTable table;
  table.header = result_header();
  for (const auto& r : rows) table.rows.push_back(result_row(r));
  for (const auto& r : aggregates) table.rows.push_back(result_row(r, "mean"));
  return to_csv(table);
}

void read_results_csv(const std::string& path, std::vector<EvalReport>& rows, std::vector<EvalReport>& aggregates) {
  if (!std::filesystem::exists(path)) throw IoError("results file not found: " + path);
  const CsvTable table = read_csv(path);
  const std::size_t seed_col = table.column("seed");
  for (const auto& row : table.rows) {
    EvalReport r = parse_result_row(table.header, row);
    (row.at(seed_col) == "mean" ? aggregates : rows).push_back(std::move(r));
  }
}

std::string regret_vs_k_csv(const std::vector<EvalReport>& aggregates) {
  CsvTable table;
  table.header = {"method", "k", "regret_mean", "regret_pct_mean", "regret_pct_pre_mean"};
  for (const auto& a : aggregates) {
    table.rows.push_back({a.method, std::to_string(a.k), format_double(a.regret_mean), format_double(a.regret_pct_mean),
                          format_double(a.regret_pct_pre_mean)});
  }
  return to_csv(table);
}

std::string report_markdown(const std::vector<EvalReport>& aggregates, const std::string& title) {
  std::vector<std::size_t> ks;
  std::vector<std::string> methods;
  for (const auto& a : aggregates) {
    if (std::find(ks.begin(), ks.end(), a.k) == ks.end()) ks.push_back(a.k);
    if (std::find(methods.begin(), methods.end(), a.method) == methods.end()) methods.push_back(a.method);
  }
  std::sort(ks.begin(), ks.end());
  auto find = [&](const std::string& method, std::size_t k) -> const EvalReport* {
    for (const auto& a : aggregates) {
      if (a.method == method && a.k == k) return &a;
    }
    return nullptr;
  };
  auto fixed = [](double v, int digits) {
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(digits);
    o << v;
    return o.str();
  };

  std::ostringstream o;
  o << "## " << title << "\n\n| Method | Metric |";
  for (auto k : ks) o << " k=" << k << " |";
  o << "\n|---|---|";
  for (std::size_t i = 0; i < ks.size(); ++i) o << "---|";
  o << "\n";
  struct Line {
    const char* label;
    double EvalReport::*field;
    int digits;
  };
  const Line lines[] = {{"Regret (%)", &EvalReport::regret_pct_mean, 4},
                        {"Regret (%) (*)", &EvalReport::regret_pct_pre_mean, 4},
                        {"Violation", &EvalReport::violation_post, 6},
                        {"Violation (*)", &EvalReport::violation_pre, 6}};
  for (const auto& method : methods) {
    for (const auto& line : lines) {
      o << "| " << method << " | " << line.label << " |";
      for (auto k : ks) {
        const EvalReport* a = find(method, k);
        o << " " << (a ? fixed(a->*(line.field), line.digits) : "-") << " |";
      }
      o << "\n";
    }
  }
  o << "\n(*) denotes before restoration. Values are means over seeds.\n";
  return o.str();
}

}  // namespace ltof::harness
