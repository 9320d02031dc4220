#pragma once

#include <memory>

#include "ltof/autodiff/tensor.hpp"
#include "ltof/problems/problem.hpp"
#include "ltof/solvers/qp.hpp"

namespace ltof::solvers {

struct Restored {
  Vector x;
  /// Clip/normalize found no positive entry and returned the uniform point.
  bool fallback = false;
};

/// Maps proxy outputs onto the feasible set with the problem's declared
/// strategy. Polytope restorers keep one projector across calls.
class Restorer {
 public:
  explicit Restorer(const problems::ParametricProblem& problem);

  Restored restore(const Vector& x_hat);
  RowMatrix restore_rows(const RowMatrix& x_hat);

 private:
  problems::Restoration kind_;
  std::unique_ptr<PolytopeProjector> projector_;
};

}  // namespace ltof::solvers
