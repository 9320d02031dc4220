#include "ltof/problems/toy2d.hpp"

namespace ltof::problems {

namespace {

LinearConstraints triangle() {
  LinearConstraints c;
  c.A.resize(0, 2);
  c.b.resize(0);
  c.G.resize(3, 2);
  c.G << 1.0, 2.0,
         2.0, -1.0,
         -1.0, -1.0;
  c.h.resize(3);
  c.h << 0.5, 0.2, -0.3;
  return c;
}

void check_dims(const Vector& x, const Vector& zeta) {
  if (x.size() != 2 || zeta.size() != 2) throw ShapeError("toy2d: x and zeta must have length 2");
}

}  // namespace

Toy2DProblem::Toy2DProblem() : ParametricProblem(triangle()) {}

double Toy2DProblem::objective(const Vector& x, const Vector& zeta) const {
  check_dims(x, zeta);
  return zeta(0) * x(0) * x(0) + zeta(1) * x(1) * x(1);
}

Vector Toy2DProblem::grad_x(const Vector& x, const Vector& zeta) const {
  check_dims(x, zeta);
  return Vector{{2.0 * zeta(0) * x(0), 2.0 * zeta(1) * x(1)}};
}

Vector Toy2DProblem::grad_zeta(const Vector& x, const Vector& zeta) const {
  check_dims(x, zeta);
  return Vector{{x(0) * x(0), x(1) * x(1)}};
}

ad::NodeId Toy2DProblem::objective_node(ad::Tape& tape, ad::NodeId x, ad::NodeId zeta) const {
  return tape.row_sum(tape.mul(zeta, tape.square(x)));
}

std::array<Vector, 3> Toy2DProblem::vertices() const {
  std::array<Vector, 3> out;
  const Matrix& G = constraints_.G;
  const Vector& h = constraints_.h;
  int k = 0;
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      Matrix M(2, 2);
      M.row(0) = G.row(i);
      M.row(1) = G.row(j);
      out[static_cast<std::size_t>(k++)] = M.partialPivLu().solve(Vector{{h(i), h(j)}});
    }
  }
  return out;
}

}  // namespace ltof::problems
