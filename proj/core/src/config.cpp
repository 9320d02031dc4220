#include "ltof/config.hpp"

#include <charconv>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>
#include <type_traits>

#include "ltof/io.hpp"

namespace ltof {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-')) return false;
  }
  return true;
}

/// Typed access to a document; tracks consumed keys so leftovers can be
/// reported as unknown.
class Reader {
 public:
  explicit Reader(const ConfigDocument& doc) : doc_(doc) {}

  const std::string* raw(const std::string& key) {
    auto it = doc_.values.find(key);
    if (it == doc_.values.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  void get(const std::string& key, double& out) {
    if (const auto* v = raw(key)) out = to_double(key, *v);
  }
  void get(const std::string& key, std::size_t& out) {
    if (const auto* v = raw(key)) out = to_size(key, *v);
  }
  void get(const std::string& key, int& out) {
    if (const auto* v = raw(key)) out = static_cast<int>(to_size(key, *v));
  }
  void get(const std::string& key, bool& out) {
    if (const auto* v = raw(key)) {
      if (*v == "true") {
        out = true;
      } else if (*v == "false") {
        out = false;
      } else {
        throw ConfigError(key + ": expected true or false, got '" + *v + "'");
      }
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const auto* v = raw(key)) out = to_string(key, *v);
  }
  void get(const std::string& key, std::vector<std::size_t>& out) {
    if (const auto* v = raw(key)) {
      out.clear();
      for (const auto& item : list_items(key, *v)) out.push_back(to_size(key, item));
    }
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (const auto* v = raw(key)) {
      out.clear();
      for (const auto& item : list_items(key, *v)) out.push_back(to_double(key, item));
    }
  }
  void get(const std::string& key, std::vector<std::string>& out) {
    if (const auto* v = raw(key)) {
      out.clear();
      for (const auto& item : list_items(key, *v)) out.push_back(to_string(key, item));
    }
  }

  void reject_unknown() const {
    for (const auto& [key, value] : doc_.values) {
      if (!used_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
  }

 private:
  static double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
      throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    return out;
  }
  static std::size_t to_size(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    }
    return static_cast<std::size_t>(out);
  }
  static std::string to_string(const std::string& key, const std::string& v) {
    if (v.size() < 2 || v.front() != '"' || v.back() != '"') {
      throw ConfigError(key + ": expected a quoted string, got '" + v + "'");
    }
    return v.substr(1, v.size() - 2);
  }
  static std::vector<std::string> list_items(const std::string& key, const std::string& v) {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
      throw ConfigError(key + ": expected a list, got '" + v + "'");
    }
    std::vector<std::string> items;
    std::stringstream ss(v.substr(1, v.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) items.push_back(item);
    }
    return items;
  }

  const ConfigDocument& doc_;
  std::set<std::string> used_;
};

template <class T>
std::string list_text(const std::vector<T>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_same_v<T, std::string>) {
      out += "\"" + items[i] + "\"";
    } else if constexpr (std::is_same_v<T, double>) {
      out += format_double(items[i]);
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out + "]";
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }
std::string boolean(bool b) { return b ? "true" : "false"; }

}  // namespace

ConfigDocument ConfigDocument::parse(const std::string& text) {
  ConfigDocument doc;
  std::string section;
  std::stringstream ss(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(ss, line)) {
    ++number;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(number) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!is_identifier(section)) throw ConfigError(where + "bad section name '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!is_identifier(key)) throw ConfigError(where + "bad key '" + key + "'");
    if (value.empty()) throw ConfigError(where + "missing value for '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (!doc.values.emplace(full, value).second) throw ConfigError(where + "duplicate key '" + full + "'");
  }
  return doc;
}

RunConfig::RunConfig() {
  model.hidden_width = 128;
  train.learning_rate = 1e-3;
  train.max_epochs = 100;
  train.patience = 30;
}

RunConfig RunConfig::from_document(const ConfigDocument& doc) {
  RunConfig c;
  Reader r(doc);
  auto& p = c.problem;
  r.get("problem.id", p.id);
  r.get("problem.seed", p.seed);
  r.get("problem.samples", p.samples);
  r.get("problem.train_ratio", p.train_ratio);
  r.get("problem.assets", p.assets);
  r.get("problem.factors", p.factors);
  r.get("problem.periods", p.periods);
  r.get("problem.persistence", p.persistence);
  r.get("problem.noise_std", p.noise_std);
  r.get("problem.alpha", p.alpha);
  r.get("problem.risk_weight", p.risk_weight);
  r.get("problem.n", p.n);
  r.get("problem.n_eq", p.n_eq);
  r.get("problem.n_ineq", p.n_ineq);
  r.get("problem.param_low", p.param_low);
  r.get("problem.param_high", p.param_high);
  r.get("problem.oracle_restarts", p.oracle_restarts);
  r.get("problem.oracle_tol", p.oracle_tol);

  r.get("features.k", c.features.k);
  r.get("features.width", c.features.width);
  r.get("features.hidden", c.features.hidden);
  r.get("features.seed", c.features.seed);

  r.get("model.hidden_width", c.model.hidden_width);
  r.get("model.hidden_layers", c.model.hidden_layers);
  r.get("model.dropout", c.model.dropout);
  r.get("model.batchnorm", c.model.batchnorm);

  r.get("train.max_epochs", c.train.max_epochs);
  r.get("train.batch_size", c.train.batch_size);
  r.get("train.learning_rate", c.train.learning_rate);
  r.get("train.patience", c.train.patience);
  std::string stop = "regret_pct";
  r.get("train.stop_metric", stop);
  if (stop == "regret_pct") {
    c.train.stop_metric = trainers::StopMetric::kRegretPct;
  } else if (stop == "regret") {
    c.train.stop_metric = trainers::StopMetric::kRegret;
  } else {
    throw ConfigError("train.stop_metric: expected \"regret_pct\" or \"regret\", got '" + stop + "'");
  }

  auto& m = c.methods;
  r.get("trainer.ld.lambda0", m.ld.lambda0);
  r.get("trainer.ld.mu0", m.ld.mu0);
  r.get("trainer.ld.step_size", m.ld.step_size);
  r.get("trainer.ld.updating_epochs", m.ld.updating_epochs);
  r.get("trainer.ld.update_period", m.ld.update_period);
  r.get("trainer.pdl.rho0", m.pdl.rho0);
  r.get("trainer.pdl.rho_max", m.pdl.rho_max);
  r.get("trainer.pdl.alpha", m.pdl.alpha);
  r.get("trainer.pdl.tau", m.pdl.tau);
  r.get("trainer.pdl.primal_epochs", m.pdl.primal_epochs);
  r.get("trainer.pdl.dual_epochs", m.pdl.dual_epochs);
  r.get("trainer.dc3.lambda", m.dc3.lambda);
  r.get("trainer.dc3.mu", m.dc3.mu);
  r.get("trainer.dc3.t_train", m.dc3.t_train);
  r.get("trainer.dc3.t_test", m.dc3.t_test);
  r.get("trainer.dc3.gamma", m.dc3.gamma);
  r.get("trainer.dc3.eq_mode", c.dc3_eq_mode);
  r.get("trainer.two_stage.layers", c.two_stage_layers);
  r.get("trainer.epo_proxy.layers", m.epo.layers);
  r.get("trainer.epo_proxy.proxy_method", c.experiment.epo_proxy_method);

  auto& e = c.experiment;
  r.get("experiment.methods", e.methods);
  r.get("experiment.seeds", e.seeds);
  r.get("experiment.seed", e.seed);
  r.get("experiment.out", e.out);
  r.get("experiment.jobs", e.jobs);
  r.get("experiment.measure_timing", e.measure_timing);
  r.get("experiment.timing_samples", e.timing_samples);

  auto& s = c.shift;
  r.get("shift.magnitudes", s.magnitudes);
  r.get("shift.train_samples", s.train_samples);
  r.get("shift.test_samples", s.test_samples);
  r.get("shift.low", s.low);
  r.get("shift.high", s.high);
  r.get("shift.method", s.method);
  r.get("shift.direction", s.direction);

  r.reject_unknown();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError&) {
    throw ConfigError("cannot read config file " + path);
  }
  try {
    return from_document(ConfigDocument::parse(text));
  } catch (const ConfigError& err) {
    throw ConfigError(path + ": " + err.what());
  }
}

void RunConfig::apply_paper_scale() {
  problem.assets = 50;
  problem.samples = problem.id == "portfolio" ? 12000 : problem.samples;
  problem.n = 50;
  problem.n_eq = 25;
  problem.n_ineq = 25;
  model.hidden_width = 500;
  train.learning_rate = 1e-4;
  train.max_epochs = 300;
}

void RunConfig::resolve() {
  if (problem.id != "portfolio" && problem.id != "nonconvex_qp" && problem.id != "toy2d") {
    throw ConfigError("problem.id: expected \"portfolio\", \"nonconvex_qp\" or \"toy2d\", got '" + problem.id +
                      "'");
  }
  if (problem.samples == 0) problem.samples = problem.id == "portfolio" ? 3000 : 2000;
  if (problem.samples < 10) throw ConfigError("problem.samples must be at least 10");
  if (!(problem.train_ratio > 0.0 && problem.train_ratio < 1.0)) {
    throw ConfigError("problem.train_ratio must lie in (0, 1)");
  }
  if (problem.id == "portfolio" && (problem.factors == 0 || problem.factors > problem.assets)) {
    throw ConfigError("problem.factors must lie in [1, assets]");
  }
  if (problem.id == "nonconvex_qp" && (problem.n_eq + problem.n_ineq == 0 || problem.n_eq >= problem.n)) {
    throw ConfigError("problem.n_eq must be below problem.n");
  }
  if (problem.oracle_restarts < 1) throw ConfigError("problem.oracle_restarts must be at least 1");
  if (features.k.empty()) throw ConfigError("features.k must list at least one depth");
  for (auto k : features.k) {
    if (k == 0) throw ConfigError("features.k entries must be at least 1");
  }
  if (features.width == 0) {
    features.width = problem.id == "portfolio" ? 30 : problem.id == "nonconvex_qp" ? 50 : 2;
  }
  if (model.dropout < 0.0 || model.dropout >= 1.0) throw ConfigError("model.dropout must lie in [0, 1)");
  if (model.hidden_width == 0) throw ConfigError("model.hidden_width must be positive");
  if (train.batch_size < 2) throw ConfigError("train.batch_size must be at least 2");
  if (!(train.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (train.max_epochs == 0) throw ConfigError("train.max_epochs must be positive");
  if (methods.pdl.rho_max < methods.pdl.rho0) throw ConfigError("trainer.pdl.rho_max must be >= rho0");
  if (methods.pdl.primal_epochs == 0) throw ConfigError("trainer.pdl.primal_epochs must be positive");
  if (methods.ld.update_period == 0) throw ConfigError("trainer.ld.update_period must be positive");
  if (two_stage_layers.empty()) throw ConfigError("trainer.two_stage.layers must not be empty");
  if (experiment.methods.empty()) {
    if (problem.id == "portfolio") {
      experiment.methods = {"ld", "pdl", "two-stage", "epo-proxy"};
      if (dc3_eq_mode) experiment.methods.insert(experiment.methods.begin() + 2, "dc3");
    } else {
      experiment.methods = {"ld", "pdl", "dc3", "two-stage"};
    }
  }
  for (auto m : method_list()) {
    if (m == trainers::Method::kDc3 && problem.id == "portfolio" && !dc3_eq_mode) {
      throw ConfigError(
          "method dc3 on the portfolio problem needs --dc3-eq-mode (trainer.dc3.eq_mode = true) to treat "
          "1^T x = 1 as its equality");
    }
  }
  const auto epo = trainers::parse_method(experiment.epo_proxy_method);
  if (!trainers::is_ltof(epo)) throw ConfigError("trainer.epo_proxy.proxy_method must be ld, pdl or dc3");
  if (epo == trainers::Method::kDc3 && problem.id == "portfolio" && !dc3_eq_mode) {
    throw ConfigError("trainer.epo_proxy.proxy_method dc3 needs trainer.dc3.eq_mode = true");
  }
  if (!trainers::is_ltof(trainers::parse_method(shift.method))) {
    throw ConfigError("shift.method must be ld, pdl or dc3");
  }
  if (experiment.seeds == 0) throw ConfigError("experiment.seeds must be positive");
  if (experiment.jobs == 0) throw ConfigError("experiment.jobs must be positive");
  if (experiment.out.empty()) throw ConfigError("experiment.out must not be empty");
  if (shift.magnitudes.empty()) throw ConfigError("shift.magnitudes must not be empty");
  if (!(shift.high > shift.low)) throw ConfigError("shift.high must exceed shift.low");
  if (shift.direction.size() != 2 || std::hypot(shift.direction[0], shift.direction[1]) == 0.0) {
    throw ConfigError("shift.direction must be a nonzero 2-vector");
  }
}

std::size_t RunConfig::feature_width() const { return features.width; }

std::vector<trainers::Method> RunConfig::method_list() const {
  std::vector<trainers::Method> out;
  for (const auto& name : experiment.methods) out.push_back(trainers::parse_method(name));
  return out;
}

std::vector<std::uint64_t> RunConfig::seed_list() const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < experiment.seeds; ++i) out.push_back(experiment.seed + i);
  return out;
}

std::string RunConfig::to_toml() const {
  std::ostringstream o;
  const auto& p = problem;
  o << "[problem]\n"
    << "id = " << quoted(p.id) << "\n"
    << "seed = " << p.seed << "\n"
    << "samples = " << p.samples << "\n"
    << "train_ratio = " << format_double(p.train_ratio) << "\n"
    << "assets = " << p.assets << "\n"
    << "factors = " << p.factors << "\n"
    << "periods = " << p.periods << "\n"
    << "persistence = " << format_double(p.persistence) << "\n"
    << "noise_std = " << format_double(p.noise_std) << "\n"
    << "alpha = " << format_double(p.alpha) << "\n"
    << "risk_weight = " << format_double(p.risk_weight) << "\n"
    << "n = " << p.n << "\n"
    << "n_eq = " << p.n_eq << "\n"
    << "n_ineq = " << p.n_ineq << "\n"
    << "param_low = " << format_double(p.param_low) << "\n"
    << "param_high = " << format_double(p.param_high) << "\n"
    << "oracle_restarts = " << p.oracle_restarts << "\n"
    << "oracle_tol = " << format_double(p.oracle_tol) << "\n\n";
  o << "[features]\n"
    << "k = " << list_text(features.k) << "\n"
    << "width = " << features.width << "\n"
    << "hidden = " << features.hidden << "\n"
    << "seed = " << features.seed << "\n\n";
  o << "[model]\n"
    << "hidden_width = " << model.hidden_width << "\n"
    << "hidden_layers = " << model.hidden_layers << "\n"
    << "dropout = " << format_double(model.dropout) << "\n"
    << "batchnorm = " << boolean(model.batchnorm) << "\n\n";
  o << "[train]\n"
    << "max_epochs = " << train.max_epochs << "\n"
    << "batch_size = " << train.batch_size << "\n"
    << "learning_rate = " << format_double(train.learning_rate) << "\n"
    << "patience = " << train.patience << "\n"
    << "stop_metric = "
    << quoted(train.stop_metric == trainers::StopMetric::kRegretPct ? "regret_pct" : "regret") << "\n\n";
  const auto& m = methods;
  o << "[trainer.ld]\n"
    << "lambda0 = " << format_double(m.ld.lambda0) << "\n"
    << "mu0 = " << format_double(m.ld.mu0) << "\n"
    << "step_size = " << format_double(m.ld.step_size) << "\n"
    << "updating_epochs = " << format_double(m.ld.updating_epochs) << "\n"
    << "update_period = " << m.ld.update_period << "\n\n";
  o << "[trainer.pdl]\n"
    << "rho0 = " << format_double(m.pdl.rho0) << "\n"
    << "rho_max = " << format_double(m.pdl.rho_max) << "\n"
    << "alpha = " << format_double(m.pdl.alpha) << "\n"
    << "tau = " << format_double(m.pdl.tau) << "\n"
    << "primal_epochs = " << m.pdl.primal_epochs << "\n"
    << "dual_epochs = " << m.pdl.dual_epochs << "\n\n";
  o << "[trainer.dc3]\n"
    << "lambda = " << format_double(m.dc3.lambda) << "\n"
    << "mu = " << format_double(m.dc3.mu) << "\n"
    << "t_train = " << m.dc3.t_train << "\n"
    << "t_test = " << m.dc3.t_test << "\n"
    << "gamma = " << format_double(m.dc3.gamma) << "\n"
    << "eq_mode = " << boolean(dc3_eq_mode) << "\n\n";
  o << "[trainer.two_stage]\n"
    << "layers = " << list_text(two_stage_layers) << "\n\n";
  o << "[trainer.epo_proxy]\n"
    << "layers = " << m.epo.layers << "\n"
    << "proxy_method = " << quoted(experiment.epo_proxy_method) << "\n\n";
  const auto& e = experiment;
  o << "[experiment]\n"
    << "methods = " << list_text(e.methods) << "\n"
    << "seeds = " << e.seeds << "\n"
    << "seed = " << e.seed << "\n"
    << "out = " << quoted(e.out) << "\n"
    << "jobs = " << e.jobs << "\n"
    << "measure_timing = " << boolean(e.measure_timing) << "\n"
    << "timing_samples = " << e.timing_samples << "\n\n";
  o << "[shift]\n"
    << "magnitudes = " << list_text(shift.magnitudes) << "\n"
    << "train_samples = " << shift.train_samples << "\n"
    << "test_samples = " << shift.test_samples << "\n"
    << "low = " << format_double(shift.low) << "\n"
    << "high = " << format_double(shift.high) << "\n"
    << "method = " << quoted(shift.method) << "\n"
    << "direction = " << list_text(shift.direction) << "\n";
  return o.str();
}

}  // namespace ltof
