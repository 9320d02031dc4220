#include "ltof/autodiff/adam.hpp"

#include <cmath>
#include <string>

namespace ltof::ad {

AdamState AdamState::for_weights(std::span<const Tensor> weights, double learning_rate) {
  AdamState state;
  state.learning_rate = learning_rate;
  for (const Tensor& w : weights) {
    state.first_moment.emplace_back(w.shape(), 0.0);
    state.second_moment.emplace_back(w.shape(), 0.0);
  }
  return state;
}

void adam_step(std::span<Tensor> weights, std::span<const Tensor> grads, AdamState& state) {
  if (weights.size() != grads.size() || weights.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: weight, gradient and moment counts differ");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!weights[i].same_shape(grads[i]) || !weights[i].same_shape(state.first_moment[i])) {
      throw ShapeError("adam_step: shape mismatch at tensor " + std::to_string(i) + " " +
                       weights[i].shape_string() + " vs " + grads[i].shape_string());
    }
    if (!grads[i].all_finite()) {
      throw DivergenceError("non-finite gradient in tensor " + std::to_string(i) + " at step " +
                            std::to_string(state.step + 1));
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    auto w = weights[i].data();
    auto g = grads[i].data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace ltof::ad
