#include "ltof/solvers/restore.hpp"

#include "ltof/solvers/simplex.hpp"

namespace ltof::solvers {

Restorer::Restorer(const problems::ParametricProblem& problem) : kind_(problem.restoration()) {
  if (kind_ == problems::Restoration::kPolytopeProjection) {
    projector_ = std::make_unique<PolytopeProjector>(problem.constraints());
  }
}

Restored Restorer::restore(const Vector& x_hat) {
  if (kind_ == problems::Restoration::kClipNormalize) {
    ClipNormalizeResult r = clip_normalize(x_hat);
    return {std::move(r.x), r.fallback};
  }
  return {projector_->project(x_hat), false};
}

RowMatrix Restorer::restore_rows(const RowMatrix& x_hat) {
  RowMatrix out(x_hat.rows(), x_hat.cols());
  for (Eigen::Index i = 0; i < x_hat.rows(); ++i) {
    out.row(i) = restore(x_hat.row(i).transpose()).x.transpose();
  }
  return out;
}

}  // namespace ltof::solvers
