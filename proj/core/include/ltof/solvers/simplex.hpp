#pragma once

#include "ltof/autodiff/tensor.hpp"

namespace ltof::solvers {

/// Euclidean projection onto {x >= 0, sum(x) = 1} by sort-and-threshold.
Vector project_simplex(const Vector& v);

struct ClipNormalizeResult {
  Vector x;
  /// No entry was positive; x is the uniform allocation.
  bool fallback = false;
};

/// max(v, 0) / sum(max(v, 0)). Cheap restoration, not a projection.
ClipNormalizeResult clip_normalize(const Vector& v);

}  // namespace ltof::solvers
