#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltof/autodiff/tape.hpp"
#include "ltof/autodiff/tensor.hpp"

namespace ltof::ad {

enum class Mode { kTraining, kInference };

struct MlpConfig {
  /// Widths from input to output; at least two entries.
  std::vector<std::size_t> layer_dims;
  double dropout_rate = 0.0;
  bool batchnorm = false;
  double batchnorm_momentum = 0.1;
  double batchnorm_eps = 1e-5;
};

/// Hidden layers are linear -> [batch-norm] -> ReLU -> [dropout]; the output
/// layer is linear with identity activation.
class MlpModel {
 public:
  /// Uniform draws in [-1/sqrt(fan_in), 1/sqrt(fan_in)], deterministic in seed.
  static MlpModel init(const MlpConfig& config, std::uint64_t seed);

  const MlpConfig& config() const { return config_; }
  std::size_t input_dim() const { return config_.layer_dims.front(); }
  std::size_t output_dim() const { return config_.layer_dims.back(); }
  std::size_t num_layers() const { return config_.layer_dims.size() - 1; }

  /// Registers every learnable tensor on the tape. Frozen bindings carry no
  /// gradient into the weights but still let gradients flow to the input.
  std::vector<NodeId> bind(Tape& tape, bool trainable = true) const;

  /// Records the forward pass. In training mode batch-norm uses batch
  /// statistics and updates the running ones, and dropout draws from `rng`.
  NodeId forward(Tape& tape, const std::vector<NodeId>& bound, NodeId input, Mode mode,
                 std::mt19937_64* rng);

  /// Tape-free inference pass (running statistics, no dropout).
  Tensor predict(const Tensor& input) const;

  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  const std::vector<Tensor>& running_means() const { return running_mean_; }
  const std::vector<Tensor>& running_vars() const { return running_var_; }
  std::vector<Tensor>& running_means() { return running_mean_; }
  std::vector<Tensor>& running_vars() { return running_var_; }

  nlohmann::json to_json() const;
  static MlpModel from_json(const nlohmann::json& doc);

  friend bool operator==(const MlpModel& a, const MlpModel& b) {
    return a.params_ == b.params_ && a.running_mean_ == b.running_mean_ &&
           a.running_var_ == b.running_var_;
  }

 private:
  // Per hidden layer: weight, bias, [scale, shift]; output layer: weight, bias.
  std::size_t param_stride() const { return config_.batchnorm ? 4 : 2; }

  MlpConfig config_;
  std::vector<Tensor> params_;
  std::vector<Tensor> running_mean_;
  std::vector<Tensor> running_var_;
};

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const MlpModel& model, const std::string& path);
MlpModel load_checkpoint(const std::string& path);

}  // namespace ltof::ad
