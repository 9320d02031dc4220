#pragma once

#include <array>

#include "ltof/problems/problem.hpp"

namespace ltof::problems {

/// minimize zeta_1 x_1^2 + zeta_2 x_2^2 over the triangle
///   x1 + 2 x2 <= 0.5,  2 x1 - x2 <= 0.2,  x1 + x2 >= 0.3.
/// The three lines, read as equalities, have no common point; as
/// inequalities they bound a triangle with nonzero area.
class Toy2DProblem final : public ParametricProblem {
 public:
  Toy2DProblem();

  std::string id() const override { return "toy2d"; }
  std::size_t n() const override { return 2; }
  std::size_t param_dim() const override { return 2; }
  Sense sense() const override { return Sense::kMinimize; }
  Restoration restoration() const override { return Restoration::kPolytopeProjection; }

  double objective(const Vector& x, const Vector& zeta) const override;
  Vector grad_x(const Vector& x, const Vector& zeta) const override;
  Vector grad_zeta(const Vector& x, const Vector& zeta) const override;
  ad::NodeId objective_node(ad::Tape& tape, ad::NodeId x, ad::NodeId zeta) const override;

  /// Corners of the feasible triangle.
  std::array<Vector, 3> vertices() const;
};

}  // namespace ltof::problems
