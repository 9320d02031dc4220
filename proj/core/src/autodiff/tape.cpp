#include "ltof/autodiff/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ltof::ad {

namespace {

std::string dims(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + dims(a) + " vs " + dims(b));
  }
}

Tensor like(const Tensor& t) { return Tensor::matrix(t.rows(), t.cols()); }

}  // namespace

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::check(NodeId id) const {
  if (id.index >= nodes_.size()) throw std::out_of_range("node id not on this tape");
}

const Tensor& Tape::value(NodeId id) const {
  check(id);
  const Node& n = nodes_[id.index];
  return n.borrowed ? *n.borrowed : n.value;
}

NodeId Tape::constant(Tensor value) { return input(std::move(value), false); }

NodeId Tape::input(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

NodeId Tape::parameter(const Tensor& borrowed, bool requires_grad) {
  Node n;
  n.borrowed = &borrowed;
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

NodeId Tape::unary(Op op, NodeId x, Tensor value) {
  Node n;
  n.op = op;
  n.inputs[0] = static_cast<std::int32_t>(x.index);
  n.value = std::move(value);
  n.requires_grad = node(x).requires_grad;
  return push(std::move(n));
}

NodeId Tape::linear(NodeId x, NodeId w, std::optional<NodeId> b) {
  check(x);
  check(w);
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  if (xv.cols() != wv.cols()) {
    throw ShapeError("linear: input width " + std::to_string(xv.cols()) +
                     " does not match weight " + dims(wv));
  }
  Tensor out = Tensor::matrix(xv.rows(), wv.rows());
  out.mat().noalias() = xv.mat() * wv.mat().transpose();
  Node n;
  n.op = Op::kLinear;
  n.inputs = {static_cast<std::int32_t>(x.index), static_cast<std::int32_t>(w.index), -1};
  n.requires_grad = node(x).requires_grad || node(w).requires_grad;
  if (b) {
    check(*b);
    const Tensor& bv = value(*b);
    if (bv.size() != wv.rows()) {
      throw ShapeError("linear: bias length " + std::to_string(bv.size()) + " vs " +
                       std::to_string(wv.rows()) + " outputs");
    }
    out.mat().rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bv.data().data(), bv.size());
    n.inputs[2] = static_cast<std::int32_t>(b->index);
    n.requires_grad = n.requires_grad || node(*b).requires_grad;
  }
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId x, NodeId m) {
  check(x);
  check(m);
  const Tensor& xv = value(x);
  const Tensor& mv = value(m);
  if (xv.cols() != mv.rows()) {
    throw ShapeError("matmul: " + dims(xv) + " times " + dims(mv));
  }
  Tensor out = Tensor::matrix(xv.rows(), mv.cols());
  out.mat().noalias() = xv.mat() * mv.mat();
  Node n;
  n.op = Op::kMatMul;
  n.inputs = {static_cast<std::int32_t>(x.index), static_cast<std::int32_t>(m.index), -1};
  n.requires_grad = node(x).requires_grad || node(m).requires_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

namespace {

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
  Tensor out = like(a);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

}  // namespace

NodeId Tape::add(NodeId a, NodeId b) {
  check(a);
  check(b);
  require_same(value(a), value(b), "add");
  Node n;
  n.op = Op::kAdd;
  n.inputs = {static_cast<std::int32_t>(a.index), static_cast<std::int32_t>(b.index), -1};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = zip(value(a), value(b), [](double u, double v) { return u + v; });
  return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  check(a);
  check(b);
  require_same(value(a), value(b), "sub");
  Node n;
  n.op = Op::kSub;
  n.inputs = {static_cast<std::int32_t>(a.index), static_cast<std::int32_t>(b.index), -1};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = zip(value(a), value(b), [](double u, double v) { return u - v; });
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  check(a);
  check(b);
  require_same(value(a), value(b), "mul");
  Node n;
  n.op = Op::kMul;
  n.inputs = {static_cast<std::int32_t>(a.index), static_cast<std::int32_t>(b.index), -1};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = zip(value(a), value(b), [](double u, double v) { return u * v; });
  return push(std::move(n));
}

NodeId Tape::add_row(NodeId x, NodeId row) {
  check(x);
  check(row);
  const Tensor& xv = value(x);
  const Tensor& rv = value(row);
  if (rv.size() != xv.cols()) throw ShapeError("add_row: row " + dims(rv) + " vs " + dims(xv));
  Tensor out = xv.rank() == 2 ? xv : Tensor::from_eigen(xv.mat());
  out.mat().rowwise() += Eigen::Map<const Eigen::RowVectorXd>(rv.data().data(), rv.size());
  Node n;
  n.op = Op::kAddRow;
  n.inputs = {static_cast<std::int32_t>(x.index), static_cast<std::int32_t>(row.index), -1};
  n.requires_grad = node(x).requires_grad || node(row).requires_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::mul_row(NodeId x, NodeId row) {
  check(x);
  check(row);
  const Tensor& xv = value(x);
  const Tensor& rv = value(row);
  if (rv.size() != xv.cols()) throw ShapeError("mul_row: row " + dims(rv) + " vs " + dims(xv));
  Tensor out = Tensor::from_eigen(xv.mat());
  out.mat().array().rowwise() *=
      Eigen::Map<const Eigen::RowVectorXd>(rv.data().data(), rv.size()).array();
  Node n;
  n.op = Op::kMulRow;
  n.inputs = {static_cast<std::int32_t>(x.index), static_cast<std::int32_t>(row.index), -1};
  n.requires_grad = node(x).requires_grad || node(row).requires_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::mul_col(NodeId x, NodeId col) {
  check(x);
  check(col);
  const Tensor& xv = value(x);
  const Tensor& cv = value(col);
  if (cv.size() != xv.rows()) throw ShapeError("mul_col: col " + dims(cv) + " vs " + dims(xv));
  Tensor out = Tensor::from_eigen(xv.mat());
  out.mat().array().colwise() *= Eigen::Map<const Eigen::VectorXd>(cv.data().data(), cv.size()).array();
  Node n;
  n.op = Op::kMulCol;
  n.inputs = {static_cast<std::int32_t>(x.index), static_cast<std::int32_t>(col.index), -1};
  n.requires_grad = node(x).requires_grad || node(col).requires_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::scale(NodeId x, double factor) {
  check(x);
  Tensor out = Tensor::from_eigen(value(x).mat() * factor);
  NodeId id = unary(Op::kScale, x, std::move(out));
  nodes_[id.index].scalar = factor;
  return id;
}

NodeId Tape::add_scalar(NodeId x, double c) {
  check(x);
  Tensor out = Tensor::from_eigen(value(x).mat().array() + c);
  return unary(Op::kAddScalar, x, std::move(out));
}

NodeId Tape::relu(NodeId x) {
  check(x);
  const Tensor& xv = value(x);
  Tensor out = like(xv);
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return unary(Op::kRelu, x, std::move(out));
}

NodeId Tape::sin(NodeId x) {
  check(x);
  const Tensor& xv = value(x);
  Tensor out = like(xv);
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::sin(xv[i]);
  return unary(Op::kSin, x, std::move(out));
}

NodeId Tape::square(NodeId x) {
  check(x);
  const Tensor& xv = value(x);
  Tensor out = like(xv);
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * xv[i];
  return unary(Op::kSquare, x, std::move(out));
}

NodeId Tape::normalize(NodeId x, double eps) {
  check(x);
  const Tensor& xv = value(x);
  const auto rows = static_cast<double>(xv.rows());
  Eigen::RowVectorXd mean = xv.mat().colwise().sum() / rows;
  RowMatrix centered = xv.mat().rowwise() - mean;
  Eigen::RowVectorXd var = centered.array().square().colwise().sum() / rows;
  Eigen::RowVectorXd inv_std = (var.array() + eps).rsqrt();
  Tensor out = Tensor::from_eigen(centered.array().rowwise() * inv_std.array());
  NodeId id = unary(Op::kNormalize, x, std::move(out));
  nodes_[id.index].scalar = eps;
  nodes_[id.index].saved = Tensor::from_eigen(inv_std);
  return id;
}

NodeId Tape::sum(NodeId x) {
  check(x);
  return unary(Op::kSum, x, Tensor::scalar(value(x).mat().sum()));
}

NodeId Tape::mean(NodeId x) {
  check(x);
  const Tensor& xv = value(x);
  if (xv.size() == 0) throw ShapeError("mean of empty tensor");
  return unary(Op::kMean, x, Tensor::scalar(xv.mat().sum() / static_cast<double>(xv.size())));
}

NodeId Tape::row_sum(NodeId x) {
  check(x);
  const Tensor& xv = value(x);
  Tensor out = Tensor::matrix(xv.rows(), 1);
  out.mat() = xv.mat().rowwise().sum();
  return unary(Op::kRowSum, x, std::move(out));
}

NodeId Tape::select_cols(NodeId x, std::vector<std::size_t> cols) {
  check(x);
  const Tensor& xv = value(x);
  Tensor out = Tensor::matrix(xv.rows(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] >= xv.cols()) throw ShapeError("select_cols: column out of range");
    for (std::size_t r = 0; r < xv.rows(); ++r) out.at(r, j) = xv.at(r, cols[j]);
  }
  NodeId id = unary(Op::kSelectCols, x, std::move(out));
  nodes_[id.index].indices = std::move(cols);
  return id;
}

NodeId Tape::scatter_cols(NodeId x, std::vector<std::size_t> cols, std::size_t width) {
  check(x);
  const Tensor& xv = value(x);
  if (cols.size() != xv.cols()) throw ShapeError("scatter_cols: index count vs width");
  Tensor out = Tensor::matrix(xv.rows(), width);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] >= width) throw ShapeError("scatter_cols: column out of range");
    for (std::size_t r = 0; r < xv.rows(); ++r) out.at(r, cols[j]) += xv.at(r, j);
  }
  NodeId id = unary(Op::kScatterCols, x, std::move(out));
  nodes_[id.index].indices = std::move(cols);
  return id;
}

Gradients Tape::backward(NodeId loss) const {
  check(loss);
  if (value(loss).size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + dims(value(loss)));
  }
  std::vector<std::optional<Tensor>> grads(nodes_.size());
  grads[loss.index] = Tensor::scalar(1.0);

  auto accum = [&](std::int32_t target) -> Tensor* {
    if (target < 0) return nullptr;
    const Node& t = nodes_[static_cast<std::size_t>(target)];
    if (!t.requires_grad) return nullptr;
    auto& slot = grads[static_cast<std::size_t>(target)];
    if (!slot) {
      const Tensor& v = t.borrowed ? *t.borrowed : t.value;
      slot = Tensor(v.shape(), 0.0);
    }
    return &*slot;
  };

  for (std::size_t idx = loss.index + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    if (n.op == Op::kLeaf || !grads[idx]) continue;
    const Tensor& g = *grads[idx];
    auto in_value = [&](int k) -> const Tensor& {
      return value(NodeId{static_cast<std::uint32_t>(n.inputs[k])});
    };

    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kLinear: {
        const Tensor& x = in_value(0);
        const Tensor& w = in_value(1);
        if (Tensor* gx = accum(n.inputs[0])) gx->mat().noalias() += g.mat() * w.mat();
        if (Tensor* gw = accum(n.inputs[1])) gw->mat().noalias() += g.mat().transpose() * x.mat();
        if (Tensor* gb = accum(n.inputs[2])) {
          Eigen::Map<Eigen::RowVectorXd>(gb->data().data(), gb->size()) += g.mat().colwise().sum();
        }
        break;
      }
      case Op::kMatMul: {
        const Tensor& x = in_value(0);
        const Tensor& m = in_value(1);
        if (Tensor* gx = accum(n.inputs[0])) gx->mat().noalias() += g.mat() * m.mat().transpose();
        if (Tensor* gm = accum(n.inputs[1])) gm->mat().noalias() += x.mat().transpose() * g.mat();
        break;
      }
      case Op::kAdd:
        if (Tensor* ga = accum(n.inputs[0])) ga->mat() += g.mat();
        if (Tensor* gb = accum(n.inputs[1])) gb->mat() += g.mat();
        break;
      case Op::kSub:
        if (Tensor* ga = accum(n.inputs[0])) ga->mat() += g.mat();
        if (Tensor* gb = accum(n.inputs[1])) gb->mat() -= g.mat();
        break;
      case Op::kMul: {
        const Tensor& a = in_value(0);
        const Tensor& b = in_value(1);
        if (Tensor* ga = accum(n.inputs[0])) ga->mat().array() += g.mat().array() * b.mat().array();
        if (Tensor* gb = accum(n.inputs[1])) gb->mat().array() += g.mat().array() * a.mat().array();
        break;
      }
      case Op::kAddRow:
        if (Tensor* gx = accum(n.inputs[0])) gx->mat() += g.mat();
        if (Tensor* gr = accum(n.inputs[1])) {
          Eigen::Map<Eigen::RowVectorXd>(gr->data().data(), gr->size()) += g.mat().colwise().sum();
        }
        break;
      case Op::kMulRow: {
        const Tensor& x = in_value(0);
        const Tensor& r = in_value(1);
        Eigen::Map<const Eigen::RowVectorXd> row(r.data().data(), r.size());
        if (Tensor* gx = accum(n.inputs[0])) gx->mat().array() += g.mat().array().rowwise() * row.array();
        if (Tensor* gr = accum(n.inputs[1])) {
          Eigen::Map<Eigen::RowVectorXd>(gr->data().data(), gr->size()) +=
              (g.mat().array() * x.mat().array()).colwise().sum().matrix();
        }
        break;
      }
      case Op::kMulCol: {
        const Tensor& x = in_value(0);
        const Tensor& c = in_value(1);
        Eigen::Map<const Eigen::VectorXd> col(c.data().data(), c.size());
        if (Tensor* gx = accum(n.inputs[0])) gx->mat().array() += g.mat().array().colwise() * col.array();
        if (Tensor* gc = accum(n.inputs[1])) {
          Eigen::Map<Eigen::VectorXd>(gc->data().data(), gc->size()) +=
              (g.mat().array() * x.mat().array()).rowwise().sum().matrix();
        }
        break;
      }
      case Op::kScale:
        if (Tensor* gx = accum(n.inputs[0])) gx->mat() += n.scalar * g.mat();
        break;
      case Op::kAddScalar:
        if (Tensor* gx = accum(n.inputs[0])) gx->mat() += g.mat();
        break;
      case Op::kRelu: {
        const Tensor& x = in_value(0);
        if (Tensor* gx = accum(n.inputs[0])) {
          for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] > 0.0) (*gx)[i] += g[i];
          }
        }
        break;
      }
      case Op::kSin: {
        const Tensor& x = in_value(0);
        if (Tensor* gx = accum(n.inputs[0])) {
          for (std::size_t i = 0; i < x.size(); ++i) (*gx)[i] += g[i] * std::cos(x[i]);
        }
        break;
      }
      case Op::kSquare: {
        const Tensor& x = in_value(0);
        if (Tensor* gx = accum(n.inputs[0])) {
          for (std::size_t i = 0; i < x.size(); ++i) (*gx)[i] += 2.0 * x[i] * g[i];
        }
        break;
      }
      case Op::kNormalize: {
        if (Tensor* gx = accum(n.inputs[0])) {
          const auto rows = static_cast<double>(g.rows());
          const auto y = n.value.mat().array();
          const auto dy = g.mat().array();
          Eigen::RowVectorXd mean_dy = dy.colwise().sum().matrix() / rows;
          Eigen::RowVectorXd mean_dy_y = (dy * y).colwise().sum().matrix() / rows;
          Eigen::Map<const Eigen::RowVectorXd> inv_std(n.saved.data().data(), n.saved.size());
          RowMatrix dx = (dy.rowwise() - mean_dy.array()) - (y.rowwise() * mean_dy_y.array());
          gx->mat().array() += dx.array().rowwise() * inv_std.array();
        }
        break;
      }
      case Op::kSum:
        if (Tensor* gx = accum(n.inputs[0])) gx->mat().array() += g[0];
        break;
      case Op::kMean:
        if (Tensor* gx = accum(n.inputs[0])) {
          gx->mat().array() += g[0] / static_cast<double>(gx->size());
        }
        break;
      case Op::kRowSum:
        if (Tensor* gx = accum(n.inputs[0])) {
          gx->mat().colwise() += Eigen::Map<const Eigen::VectorXd>(g.data().data(), g.size());
        }
        break;
      case Op::kSelectCols:
        if (Tensor* gx = accum(n.inputs[0])) {
          for (std::size_t j = 0; j < n.indices.size(); ++j) {
            for (std::size_t r = 0; r < g.rows(); ++r) gx->at(r, n.indices[j]) += g.at(r, j);
          }
        }
        break;
      case Op::kScatterCols:
        if (Tensor* gx = accum(n.inputs[0])) {
          for (std::size_t j = 0; j < n.indices.size(); ++j) {
            for (std::size_t r = 0; r < g.rows(); ++r) gx->at(r, j) += g.at(r, n.indices[j]);
          }
        }
        break;
    }
  }
  return Gradients(std::move(grads));
}

const Tensor* Gradients::find(NodeId id) const {
  if (id.index >= grads_.size() || !grads_[id.index]) return nullptr;
  return &*grads_[id.index];
}

Tensor Gradients::get_or_zero(NodeId id, const Tensor& like_tensor) const {
  if (const Tensor* g = find(id)) return *g;
  return Tensor(like_tensor.shape(), 0.0);
}

const Tensor& Gradients::operator[](NodeId id) const {
  const Tensor* g = find(id);
  if (!g) throw std::out_of_range("no gradient recorded for node " + std::to_string(id.index));
  return *g;
}

}  // namespace ltof::ad
