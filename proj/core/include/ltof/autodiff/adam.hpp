#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ltof/autodiff/tensor.hpp"

namespace ltof::ad {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_weights(std::span<const Tensor> weights, double learning_rate);
};

/// Bias-corrected Adam update, applied to `weights` in place. Throws
/// DivergenceError when a gradient is not finite; the weights are left
/// untouched in that case.
void adam_step(std::span<Tensor> weights, std::span<const Tensor> grads, AdamState& state);

}  // namespace ltof::ad
