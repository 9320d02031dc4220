#include "ltof/autodiff/mlp.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ltof/io.hpp"

namespace ltof::ad {

MlpModel MlpModel::init(const MlpConfig& config, std::uint64_t seed) {
  if (config.layer_dims.size() < 2) {
    throw ShapeError("MLP needs at least an input and an output width");
  }
  for (std::size_t d : config.layer_dims) {
    if (d == 0) throw ShapeError("MLP layer widths must be positive");
  }
  if (config.dropout_rate < 0.0 || config.dropout_rate >= 1.0) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }

  MlpModel model;
  model.config_ = config;
  std::mt19937_64 rng(seed);
  const std::size_t layers = config.layer_dims.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = config.layer_dims[l];
    const std::size_t out = config.layer_dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor w = Tensor::matrix(out, in);
    for (double& v : w.data()) v = dist(rng);
    Tensor b({out});
    for (double& v : b.data()) v = dist(rng);
    model.params_.push_back(std::move(w));
    model.params_.push_back(std::move(b));
    const bool hidden = l + 1 < layers;
    if (hidden && config.batchnorm) {
      model.params_.emplace_back(std::vector<std::size_t>{out}, 1.0);
      model.params_.emplace_back(std::vector<std::size_t>{out}, 0.0);
      model.running_mean_.emplace_back(std::vector<std::size_t>{out}, 0.0);
      model.running_var_.emplace_back(std::vector<std::size_t>{out}, 1.0);
    }
  }
  return model;
}

std::vector<NodeId> MlpModel::bind(Tape& tape, bool trainable) const {
  std::vector<NodeId> ids;
  ids.reserve(params_.size());
  for (const Tensor& p : params_) ids.push_back(tape.parameter(p, trainable));
  return ids;
}

NodeId MlpModel::forward(Tape& tape, const std::vector<NodeId>& bound, NodeId input, Mode mode,
                         std::mt19937_64* rng) {
  const Tensor& x = tape.value(input);
  if (x.cols() != input_dim()) {
    throw ShapeError("MLP input width " + std::to_string(x.cols()) + " but first layer expects " +
                     std::to_string(input_dim()));
  }
  if (bound.size() != params_.size()) throw std::invalid_argument("binding does not match model");
  const bool training = mode == Mode::kTraining;
  if (training && config_.dropout_rate > 0.0 && rng == nullptr) {
    throw std::invalid_argument("training-mode dropout requires a random source");
  }

  const std::size_t layers = num_layers();
  const std::size_t batch = x.rows();
  std::size_t p = 0;
  std::size_t bn = 0;
  NodeId h = input;
  for (std::size_t l = 0; l < layers; ++l) {
    const bool hidden = l + 1 < layers;
    h = tape.linear(h, bound[p], bound[p + 1]);
    if (!hidden) break;
    if (config_.batchnorm) {
      if (training) {
        const Tensor& pre = tape.value(h);
        const auto rows = static_cast<double>(batch);
        Eigen::RowVectorXd mean = pre.mat().colwise().sum() / rows;
        Eigen::RowVectorXd var =
            (pre.mat().rowwise() - mean).array().square().colwise().sum().matrix() / rows;
        auto rm = running_mean_[bn].mat();
        auto rv = running_var_[bn].mat();
        const double m = config_.batchnorm_momentum;
        rm = (1.0 - m) * rm + m * mean;
        rv = (1.0 - m) * rv + m * var;
        h = tape.normalize(h, config_.batchnorm_eps);
      } else {
        Tensor shift = running_mean_[bn];
        for (double& v : shift.data()) v = -v;
        Tensor inv_std = running_var_[bn];
        for (double& v : inv_std.data()) v = 1.0 / std::sqrt(v + config_.batchnorm_eps);
        h = tape.add_row(h, tape.constant(std::move(shift)));
        h = tape.mul_row(h, tape.constant(std::move(inv_std)));
      }
      h = tape.mul_row(h, bound[p + 2]);
      h = tape.add_row(h, bound[p + 3]);
      ++bn;
    }
    h = tape.relu(h);
    if (training && config_.dropout_rate > 0.0) {
      const double keep = 1.0 - config_.dropout_rate;
      std::bernoulli_distribution draw(keep);
      const Tensor& a = tape.value(h);
      Tensor mask = Tensor::matrix(a.rows(), a.cols());
      for (double& v : mask.data()) v = draw(*rng) ? 1.0 / keep : 0.0;
      h = tape.mul(h, tape.constant(std::move(mask)));
    }
    p += param_stride();
  }
  return h;
}

Tensor MlpModel::predict(const Tensor& input) const {
  if (input.cols() != input_dim()) {
    throw ShapeError("MLP input width " + std::to_string(input.cols()) + " but first layer expects " +
                     std::to_string(input_dim()));
  }
  const std::size_t layers = num_layers();
  RowMatrix h = input.mat();
  std::size_t p = 0;
  std::size_t bn = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor& w = params_[p];
    const Tensor& b = params_[p + 1];
    RowMatrix next = h * w.mat().transpose();
    next.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data().data(), b.size());
    h = std::move(next);
    if (l + 1 == layers) break;
    if (config_.batchnorm) {
      Eigen::Map<const Eigen::RowVectorXd> rm(running_mean_[bn].data().data(), running_mean_[bn].size());
      Eigen::Map<const Eigen::RowVectorXd> rv(running_var_[bn].data().data(), running_var_[bn].size());
      Eigen::Map<const Eigen::RowVectorXd> scale(params_[p + 2].data().data(), params_[p + 2].size());
      Eigen::Map<const Eigen::RowVectorXd> shift(params_[p + 3].data().data(), params_[p + 3].size());
      Eigen::RowVectorXd inv_std = (rv.array() + config_.batchnorm_eps).sqrt().inverse();
      h.rowwise() -= rm;
      h.array().rowwise() *= inv_std.array();
      h.array().rowwise() *= scale.array();
      h.rowwise() += shift;
      ++bn;
    }
    h = h.cwiseMax(0.0);
    p += param_stride();
  }
  return Tensor::from_eigen(h);
}

namespace {

std::vector<double> flat(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor read_flat(const nlohmann::json& arr, std::vector<std::size_t> shape) {
  auto values = arr.get<std::vector<double>>();
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace

nlohmann::json MlpModel::to_json() const {
  nlohmann::json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["layer_dims"] = config_.layer_dims;
  doc["activation"] = "relu";
  doc["dropout_rate"] = config_.dropout_rate;
  nlohmann::json bn;
  bn["enabled"] = config_.batchnorm;
  bn["momentum"] = config_.batchnorm_momentum;
  bn["eps"] = config_.batchnorm_eps;
  bn["means"] = nlohmann::json::array();
  bn["vars"] = nlohmann::json::array();
  bn["scales"] = nlohmann::json::array();
  bn["shifts"] = nlohmann::json::array();
  nlohmann::json weights = nlohmann::json::array();
  std::size_t p = 0;
  std::size_t b = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    weights.push_back({{"weight", flat(params_[p])}, {"bias", flat(params_[p + 1])}});
    if (l + 1 < num_layers() && config_.batchnorm) {
      bn["means"].push_back(flat(running_mean_[b]));
      bn["vars"].push_back(flat(running_var_[b]));
      bn["scales"].push_back(flat(params_[p + 2]));
      bn["shifts"].push_back(flat(params_[p + 3]));
      ++b;
    }
    p += l + 1 < num_layers() ? param_stride() : 2;
  }
  doc["batchnorm"] = std::move(bn);
  doc["weights"] = std::move(weights);
  return doc;
}

MlpModel MlpModel::from_json(const nlohmann::json& doc) {
  if (doc.value("format_version", 0) != kCheckpointFormatVersion) {
    throw std::runtime_error("unsupported checkpoint format_version");
  }
  if (doc.value("activation", std::string()) != "relu") {
    throw std::runtime_error("checkpoint activation must be relu");
  }
  MlpConfig config;
  config.layer_dims = doc.at("layer_dims").get<std::vector<std::size_t>>();
  config.dropout_rate = doc.at("dropout_rate").get<double>();
  const auto& bn = doc.at("batchnorm");
  config.batchnorm = bn.at("enabled").get<bool>();
  config.batchnorm_momentum = bn.value("momentum", 0.1);
  config.batchnorm_eps = bn.value("eps", 1e-5);

  MlpModel model = init(config, 0);
  const auto& weights = doc.at("weights");
  if (weights.size() != model.num_layers()) throw std::runtime_error("checkpoint layer count mismatch");
  std::size_t p = 0;
  std::size_t b = 0;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    model.params_[p] = read_flat(weights[l].at("weight"), model.params_[p].shape());
    model.params_[p + 1] = read_flat(weights[l].at("bias"), model.params_[p + 1].shape());
    if (l + 1 < model.num_layers() && config.batchnorm) {
      model.running_mean_[b] = read_flat(bn.at("means").at(b), model.running_mean_[b].shape());
      model.running_var_[b] = read_flat(bn.at("vars").at(b), model.running_var_[b].shape());
      model.params_[p + 2] = read_flat(bn.at("scales").at(b), model.params_[p + 2].shape());
      model.params_[p + 3] = read_flat(bn.at("shifts").at(b), model.params_[p + 3].shape());
      for (double v : model.running_var_[b].data()) {
        if (!(v > 0.0)) throw std::runtime_error("checkpoint running variance must be positive");
      }
      ++b;
    }
    p += l + 1 < model.num_layers() ? model.param_stride() : 2;
  }
  return model;
}

void save_checkpoint(const MlpModel& model, const std::string& path) {
  write_file_atomic(path, model.to_json().dump(1) + "\n");
}

MlpModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path);
  return MlpModel::from_json(nlohmann::json::parse(in));
}

}  // namespace ltof::ad
