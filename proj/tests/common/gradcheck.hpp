#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ltof/autodiff/tape.hpp"
#include "ltof/problems/problem.hpp"

namespace ltof::testing {

using Builder = std::function<ad::NodeId(ad::Tape&, ad::NodeId)>;

inline Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = u(rng);
  return v;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

inline double eval_loss(const Builder& build, const Tensor& x) {
  ad::Tape tape;
  const auto in = tape.input(x, false);
  return tape.value(tape.sum(build(tape, in)))[0];
}

/// Worst relative error between the tape gradient of sum(build(x)) and a
/// central difference, over every entry of x.
inline double fd_error(const Builder& build, const Tensor& x, double h = 1e-6) {
  ad::Tape tape;
  const auto in = tape.input(x, true);
  const auto loss = tape.sum(build(tape, in));
  const Tensor grad = tape.backward(loss).get_or_zero(in, x);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor plus = x, minus = x;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (eval_loss(build, plus) - eval_loss(build, minus)) / (2.0 * h);
    worst = std::max(worst, relative_error(grad[i], fd));
  }
  return worst;
}

struct OpCase {
  std::string name;
  std::function<Builder(std::mt19937_64&)> make;
  double lo = -1.0;
  double hi = 1.0;
};

/// One case per tape primitive; inputs are 5 x 3.
inline std::vector<OpCase> op_cases() {
  using ad::NodeId;
  using ad::Tape;
  return {
      {"linear", [](std::mt19937_64& rng) -> Builder {
         Tensor w = random_tensor(4, 3, rng), b = random_tensor(1, 4, rng);
         return [w, b](Tape& t, NodeId x) { return t.linear(x, t.constant(w), t.constant(b)); };
       }},
      {"matmul", [](std::mt19937_64& rng) -> Builder {
         Tensor m = random_tensor(3, 2, rng);
         return [m](Tape& t, NodeId x) { return t.matmul(x, t.constant(m)); };
       }},
      {"add_sub_mul", [](std::mt19937_64& rng) -> Builder {
         Tensor c = random_tensor(5, 3, rng);
         return [c](Tape& t, NodeId x) {
           const NodeId k = t.constant(c);
           return t.mul(t.add(x, k), t.sub(x, t.scale(k, 0.5)));
         };
       }},
      {"row_col_broadcast", [](std::mt19937_64& rng) -> Builder {
         Tensor r = random_tensor(1, 3, rng), c = random_tensor(5, 1, rng);
         return [r, c](Tape& t, NodeId x) {
           return t.mul_col(t.mul_row(t.add_row(x, t.constant(r)), t.constant(r)), t.constant(c));
         };
       }},
      {"scale_add_scalar", [](std::mt19937_64&) -> Builder {
         return [](Tape& t, NodeId x) { return t.square(t.add_scalar(t.scale(x, -2.5), 0.3)); };
       }},
      {"relu_positive", [](std::mt19937_64&) -> Builder {
         return [](Tape& t, NodeId x) { return t.square(t.relu(x)); };
       }, 0.05, 1.0},
      {"relu_negative", [](std::mt19937_64&) -> Builder {
         return [](Tape& t, NodeId x) { return t.relu(x); };
       }, -1.0, -0.05},
      {"sin_square", [](std::mt19937_64&) -> Builder {
         return [](Tape& t, NodeId x) { return t.square(t.sin(x)); };
       }},
      {"normalize", [](std::mt19937_64& rng) -> Builder {
         Tensor w = random_tensor(5, 3, rng);
         return [w](Tape& t, NodeId x) { return t.mul(t.normalize(x, 1e-5), t.constant(w)); };
       }},
      {"sum_mean_row_sum", [](std::mt19937_64& rng) -> Builder {
         Tensor c = random_tensor(5, 1, rng);
         return [c](Tape& t, NodeId x) {
           return t.add(t.sum(t.mul(t.row_sum(t.square(x)), t.constant(c))), t.mean(t.square(x)));
         };
       }},
      {"select_scatter", [](std::mt19937_64& rng) -> Builder {
         Tensor c = random_tensor(5, 4, rng);
         return [c](Tape& t, NodeId x) {
           const NodeId s = t.select_cols(x, {2, 0});
           return t.mul(t.scatter_cols(t.square(s), {1, 3}, 4), t.constant(c));
         };
       }},
  };
}

/// Worst relative error over `draws` random points of the analytic
/// gradients grad_x, grad_zeta and of the tape objective, against central
/// differences of the scalar objective.
inline double problem_gradient_error(const problems::ParametricProblem& p, int draws, std::uint64_t seed,
                                     double zeta_lo = 0.5, double zeta_hi = 1.5) {
  std::mt19937_64 rng(seed);
  const double h = 1e-6;
  double worst = 0.0;
  for (int d = 0; d < draws; ++d) {
    const Vector x = random_vector(p.n(), rng);
    const Vector z = random_vector(p.param_dim(), rng, zeta_lo, zeta_hi);
    const Vector gx = p.grad_x(x, z), gz = p.grad_zeta(x, z);
    ad::Tape tape;
    const auto xn = tape.input(Tensor::from_eigen(x.transpose()), true);
    const auto zn = tape.input(Tensor::from_eigen(z.transpose()), true);
    const auto grads = tape.backward(tape.sum(p.objective_node(tape, xn, zn)));
    const Tensor tx = grads.get_or_zero(xn, tape.value(xn)), tz = grads.get_or_zero(zn, tape.value(zn));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Vector a = x, b = x;
      a[i] += h;
      b[i] -= h;
      const double fd = (p.objective(a, z) - p.objective(b, z)) / (2 * h);
      worst = std::max({worst, relative_error(gx[i], fd), relative_error(tx[static_cast<std::size_t>(i)], fd)});
    }
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      Vector a = z, b = z;
      a[i] += h;
      b[i] -= h;
      const double fd = (p.objective(x, a) - p.objective(x, b)) / (2 * h);
      worst = std::max({worst, relative_error(gz[i], fd), relative_error(tz[static_cast<std::size_t>(i)], fd)});
    }
  }
  return worst;
}

}  // namespace ltof::testing
