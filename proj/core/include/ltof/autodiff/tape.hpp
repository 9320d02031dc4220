#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "ltof/autodiff/tensor.hpp"

namespace ltof::ad {

struct NodeId {
  std::uint32_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

enum class Op : std::uint8_t {
  kLeaf,
  kLinear,       // x * w^T + b
  kMatMul,       // x * m
  kAdd,
  kSub,
  kMul,          // elementwise
  kAddRow,       // x + broadcast row
  kMulRow,       // x * broadcast row
  kMulCol,       // x * broadcast column
  kScale,
  kAddScalar,
  kRelu,
  kSin,
  kSquare,
  kNormalize,    // per-column (x - mean) / sqrt(var + eps), batch statistics
  kSum,
  kMean,
  kRowSum,
  kSelectCols,
  kScatterCols,
};

class Gradients;

/// Append-only record of primitive ops over batch-major matrices. Every node
/// references strictly earlier nodes, so one reverse sweep visits each node
/// once. Parameters may be borrowed from a model; the borrowed tensor must
/// outlive the tape.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  NodeId constant(Tensor value);
  NodeId input(Tensor value, bool requires_grad);
  NodeId parameter(const Tensor& borrowed, bool requires_grad = true);

  NodeId linear(NodeId x, NodeId w, std::optional<NodeId> b = std::nullopt);
  NodeId matmul(NodeId x, NodeId m);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId add_row(NodeId x, NodeId row);
  NodeId mul_row(NodeId x, NodeId row);
  NodeId mul_col(NodeId x, NodeId col);
  NodeId scale(NodeId x, double factor);
  NodeId add_scalar(NodeId x, double c);
  NodeId relu(NodeId x);
  NodeId sin(NodeId x);
  NodeId square(NodeId x);
  NodeId normalize(NodeId x, double eps);
  NodeId sum(NodeId x);
  NodeId mean(NodeId x);
  NodeId row_sum(NodeId x);
  NodeId select_cols(NodeId x, std::vector<std::size_t> cols);
  NodeId scatter_cols(NodeId x, std::vector<std::size_t> cols, std::size_t width);

  const Tensor& value(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_[id.index].requires_grad; }
  Op op(NodeId id) const { return nodes_[id.index].op; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a 1x1 loss node.
  Gradients backward(NodeId loss) const;

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::array<std::int32_t, 3> inputs{-1, -1, -1};
    Tensor value;
    const Tensor* borrowed = nullptr;
    bool requires_grad = false;
    double scalar = 0.0;
    std::vector<std::size_t> indices;
    Tensor saved;
  };

  const Node& node(NodeId id) const { return nodes_[id.index]; }
  NodeId push(Node n);
  NodeId unary(Op op, NodeId x, Tensor value);
  void check(NodeId id) const;

  std::vector<Node> nodes_;
};

/// Sparse gradient table produced by Tape::backward. Nodes that do not
/// require gradients, or that the loss does not depend on, have no entry.
class Gradients {
 public:
  explicit Gradients(std::vector<std::optional<Tensor>> grads) : grads_(std::move(grads)) {}

  const Tensor* find(NodeId id) const;
  /// Gradient of `id`; zero-filled of shape `like` when the node is absent.
  Tensor get_or_zero(NodeId id, const Tensor& like) const;
  const Tensor& operator[](NodeId id) const;

 private:
  std::vector<std::optional<Tensor>> grads_;
};

}  // namespace ltof::ad
