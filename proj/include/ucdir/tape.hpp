#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "ucdir/dense.hpp"

namespace ucdir {

/// Index of a node on a Tape.
struct NodeId {
  std::size_t index = 0;
  bool operator==(const NodeId&) const = default;
};

/// Inputs with Euclidean norm below this are rejected by l2_normalize_rows.
inline constexpr double kMinNormalizeNorm = 1e-8;

/// Reverse-mode differentiation over dense arrays.
///
/// Nodes are appended in construction order, so inputs always precede their
/// consumers. Shapes are checked when a node is added; values are computed by
/// forward() and cached for backward(). Gradients are accumulated in exact
/// reverse construction order, which keeps them bit-reproducible.
///
/// A Tape is single-owner and not thread-safe.
class Tape {
 public:
  enum class Op {
    Constant,
    Parameter,
    MatMul,
    MatMulNT,
    Add,
    Sub,
    Mul,
    AddRow,
    Scale,
    AddScalar,
    Exp,
    Log,
    Tanh,
    Square,
    Sum,
    Dot,
    L2NormalizeRows,
    LogSoftmaxRows,
  };

  /// Leaf without gradient.
  NodeId constant(DenseArray value);
  /// Trainable leaf; receives a gradient from backward().
  NodeId parameter(DenseArray value);

  /// a (r x k) times b (k x c).
  NodeId matmul(NodeId a, NodeId b);
  /// a (r x k) times transpose of b (c x k).
  NodeId matmul_nt(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  /// Adds the 1 x c row `row` to every row of `a`.
  NodeId add_row(NodeId a, NodeId row);
  NodeId scale(NodeId a, double factor);
  NodeId add_scalar(NodeId a, double offset);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId tanh(NodeId a);
  NodeId square(NodeId a);
  /// Sum of all entries, as a 1x1 array.
  NodeId sum(NodeId a);
  /// Sum of the elementwise product of two same-shape arrays, as 1x1.
  NodeId dot(NodeId a, NodeId b);
  /// Divides each row by its Euclidean norm. Throws CollapseError on
  /// forward() when a row norm is below kMinNormalizeNorm.
  NodeId l2_normalize_rows(NodeId a);
  /// Row-wise log-softmax with max subtraction.
  NodeId log_softmax_rows(NodeId a);

  /// Evaluates every node up to and including `root` and returns its value.
  const DenseArray& forward(NodeId root);
  /// forward() on the most recently added node.
  const DenseArray& forward();

  /// Reverse accumulation from a scalar root. forward(root) must have run.
  void backward(NodeId root);

  const DenseArray& value(NodeId id) const;
  const Shape& shape(NodeId id) const;
  /// Gradient of the last backward() root w.r.t. `id`, or nullopt for nodes
  /// that do not depend on any parameter.
  std::optional<DenseArray> gradient(NodeId id) const;
  bool requires_grad(NodeId id) const;

  std::size_t size() const { return nodes_.size(); }
  std::vector<NodeId> parameters() const;

  static std::string_view op_name(Op op);

 private:
  struct Node {
    Op op;
    NodeId lhs;
    NodeId rhs;
    double scalar = 0.0;
    Shape shape;
    bool requires_grad = false;
    DenseArray value;
    DenseArray grad;
  };

  NodeId push(Op op, NodeId lhs, NodeId rhs, Shape shape, double scalar = 0.0);
  NodeId unary(Op op, NodeId a);
  NodeId same_shape_binary(Op op, NodeId a, NodeId b);
  const Node& node(NodeId id) const;
  [[noreturn]] void structural(Op op, std::string_view detail) const;
  void evaluate(Node& n);
  void propagate(const Node& n);

  std::vector<Node> nodes_;
  std::size_t evaluated_ = 0;
  bool has_grad_ = false;
};

}  // namespace ucdir
