#include "ltof/solvers/simplex.hpp"

#include <algorithm>
#include <functional>
#include <vector>

namespace ltof::solvers {

Vector project_simplex(const Vector& v) {
  const auto n = v.size();
  if (n == 0) throw ShapeError("project_simplex: empty vector");
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumsum += sorted[static_cast<std::size_t>(k)];
    const double t = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (sorted[static_cast<std::size_t>(k)] - t > 0.0) theta = t;
  }
  Vector x = (v.array() - theta).cwiseMax(0.0).matrix();
  const double s = x.sum();
  if (s > 0.0) {
    x /= s;
  } else {
    x.setConstant(1.0 / static_cast<double>(n));
  }
  return x;
}

ClipNormalizeResult clip_normalize(const Vector& v) {
  if (v.size() == 0) throw ShapeError("clip_normalize: empty vector");
  Vector x = v.cwiseMax(0.0);
  const double s = x.sum();
  if (!(s > 0.0)) {
    return {Vector::Constant(v.size(), 1.0 / static_cast<double>(v.size())), true};
  }
  return {x / s, false};
}

}  // namespace ltof::solvers
