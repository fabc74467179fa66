#include "ucdir/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ucdir/error.hpp"

namespace ucdir {
namespace {

// out (r x c) += a (r x k) * b (k x c)
void gemm_nn(const DenseArray& a, const DenseArray& b, DenseArray& out) {
  const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
  for (std::size_t i = 0; i < r; ++i) {
    double* o = out.data().data() + i * c;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      const double* brow = b.data().data() + p * c;
      for (std::size_t j = 0; j < c; ++j) o[j] += av * brow[j];
    }
  }
}

// out (r x c) += a (r x k) * b^T, b is (c x k)
void gemm_nt(const DenseArray& a, const DenseArray& b, DenseArray& out) {
  const std::size_t r = a.rows(), c = b.rows();
  for (std::size_t i = 0; i < r; ++i) {
    const auto arow = a.row_span(i);
    for (std::size_t j = 0; j < c; ++j) out(i, j) += dot(arow, b.row_span(j));
  }
}

// out (k x c) += a^T * g, a is (r x k), g is (r x c)
void gemm_tn(const DenseArray& a, const DenseArray& g, DenseArray& out) {
  const std::size_t r = a.rows(), k = a.cols(), c = g.cols();
  for (std::size_t i = 0; i < r; ++i) {
    const double* grow = g.data().data() + i * c;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      double* o = out.data().data() + p * c;
      for (std::size_t j = 0; j < c; ++j) o[j] += av * grow[j];
    }
  }
}

}  // namespace

std::string_view Tape::op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Parameter: return "parameter";
    case Op::MatMul: return "matmul";
    case Op::MatMulNT: return "matmul_nt";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::AddRow: return "add_row";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Tanh: return "tanh";
    case Op::Square: return "square";
    case Op::Sum: return "sum";
    case Op::Dot: return "dot";
    case Op::L2NormalizeRows: return "l2_normalize_rows";
    case Op::LogSoftmaxRows: return "log_softmax_rows";
  }
  return "unknown";
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id.index >= nodes_.size()) {
    throw StructuralError("node " + std::to_string(id.index) + " does not exist on a tape of " +
                          std::to_string(nodes_.size()) + " nodes");
  }
  return nodes_[id.index];
}

void Tape::structural(Op op, std::string_view detail) const {
  throw StructuralError("node " + std::to_string(nodes_.size()) + " (" + std::string(op_name(op)) +
                        "): " + std::string(detail));
}

NodeId Tape::push(Op op, NodeId lhs, NodeId rhs, Shape shape, double scalar) {
  Node n{op, lhs, rhs, scalar, shape, false, {}, {}};
  if (op != Op::Constant && op != Op::Parameter) {
    n.requires_grad = nodes_[lhs.index].requires_grad || nodes_[rhs.index].requires_grad;
  }
  nodes_.push_back(std::move(n));
  return NodeId{nodes_.size() - 1};
}

NodeId Tape::constant(DenseArray value) {
  if (!value.all_finite()) structural(Op::Constant, "non-finite leaf value");
  const Shape s = value.shape();
  NodeId id = push(Op::Constant, {}, {}, s);
  nodes_.back().value = std::move(value);
  return id;
}

NodeId Tape::parameter(DenseArray value) {
  if (!value.all_finite()) structural(Op::Parameter, "non-finite leaf value");
  const Shape s = value.shape();
  NodeId id = push(Op::Parameter, {}, {}, s);
  nodes_.back().value = std::move(value);
  nodes_.back().requires_grad = true;
  return id;
}

NodeId Tape::unary(Op op, NodeId a) {
  const Shape s = node(a).shape;
  return push(op, a, a, s);
}

NodeId Tape::same_shape_binary(Op op, NodeId a, NodeId b) {
  const Shape& sa = node(a).shape;
  const Shape& sb = node(b).shape;
  if (!(sa == sb)) structural(op, "shape mismatch " + sa.str() + " vs " + sb.str());
  return push(op, a, b, sa);
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Shape& sa = node(a).shape;
  const Shape& sb = node(b).shape;
  if (sa.cols != sb.rows) structural(Op::MatMul, "inner dimensions " + sa.str() + " * " + sb.str());
  return push(Op::MatMul, a, b, Shape{sa.rows, sb.cols});
}

NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  const Shape& sa = node(a).shape;
  const Shape& sb = node(b).shape;
  if (sa.cols != sb.cols) {
    structural(Op::MatMulNT, "inner dimensions " + sa.str() + " * " + sb.str() + "^T");
  }
  return push(Op::MatMulNT, a, b, Shape{sa.rows, sb.rows});
}

NodeId Tape::add(NodeId a, NodeId b) { return same_shape_binary(Op::Add, a, b); }
NodeId Tape::sub(NodeId a, NodeId b) { return same_shape_binary(Op::Sub, a, b); }
NodeId Tape::mul(NodeId a, NodeId b) { return same_shape_binary(Op::Mul, a, b); }
NodeId Tape::dot(NodeId a, NodeId b) {
  same_shape_binary(Op::Dot, a, b);
  nodes_.back().shape = Shape{1, 1};
  return NodeId{nodes_.size() - 1};
}

NodeId Tape::add_row(NodeId a, NodeId row) {
  const Shape& sa = node(a).shape;
  const Shape& sr = node(row).shape;
  if (sr.rows != 1 || sr.cols != sa.cols) {
    structural(Op::AddRow, "row " + sr.str() + " does not broadcast over " + sa.str());
  }
  return push(Op::AddRow, a, row, sa);
}

NodeId Tape::scale(NodeId a, double factor) {
  NodeId id = unary(Op::Scale, a);
  nodes_.back().scalar = factor;
  return id;
}

NodeId Tape::add_scalar(NodeId a, double offset) {
  NodeId id = unary(Op::AddScalar, a);
  nodes_.back().scalar = offset;
  return id;
}

NodeId Tape::exp(NodeId a) { return unary(Op::Exp, a); }
NodeId Tape::log(NodeId a) { return unary(Op::Log, a); }
NodeId Tape::tanh(NodeId a) { return unary(Op::Tanh, a); }
NodeId Tape::square(NodeId a) { return unary(Op::Square, a); }
NodeId Tape::l2_normalize_rows(NodeId a) { return unary(Op::L2NormalizeRows, a); }
NodeId Tape::log_softmax_rows(NodeId a) {
  if (node(a).shape.cols == 0) structural(Op::LogSoftmaxRows, "zero columns");
  return unary(Op::LogSoftmaxRows, a);
}

NodeId Tape::sum(NodeId a) {
  node(a);
  return push(Op::Sum, a, a, Shape{1, 1});
}

void Tape::evaluate(Node& n) {
  if (n.op == Op::Constant || n.op == Op::Parameter) return;
  const DenseArray& a = nodes_[n.lhs.index].value;
  const DenseArray& b = nodes_[n.rhs.index].value;
  DenseArray out(n.shape.rows, n.shape.cols);
  auto& o = out.data();
  const auto& av = a.data();
  switch (n.op) {
    case Op::MatMul: gemm_nn(a, b, out); break;
    case Op::MatMulNT: gemm_nt(a, b, out); break;
    case Op::Add:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + b[i];
      break;
    case Op::Sub:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] - b[i];
      break;
    case Op::Mul:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * b[i];
      break;
    case Op::AddRow:
      for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) + b[c];
      }
      break;
    case Op::Scale:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * n.scalar;
      break;
    case Op::AddScalar:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + n.scalar;
      break;
    case Op::Exp:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::exp(av[i]);
      break;
    case Op::Log:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::log(av[i]);
      break;
    case Op::Tanh:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::tanh(av[i]);
      break;
    case Op::Square:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * av[i];
      break;
    case Op::Sum: {
      double s = 0.0;
      for (double v : av) s += v;
      o[0] = s;
      break;
    }
    case Op::Dot: o[0] = ucdir::dot(av, b.data()); break;
    case Op::L2NormalizeRows:
      for (std::size_t r = 0; r < a.rows(); ++r) {
        const double norm = l2_norm(a.row_span(r));
        if (!(norm >= kMinNormalizeNorm)) {
          throw CollapseError("collapse: row " + std::to_string(r) + " has norm " +
                              std::to_string(norm) + " below " + std::to_string(kMinNormalizeNorm));
        }
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) / norm;
      }
      break;
    case Op::LogSoftmaxRows:
      for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto row = a.row_span(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double v : row) s += std::exp(v - mx);
        const double lse = mx + std::log(s);
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = row[c] - lse;
      }
      break;
    case Op::Constant:
    case Op::Parameter: break;
  }
  n.value = std::move(out);
}

const DenseArray& Tape::forward(NodeId root) {
  node(root);
  for (; evaluated_ <= root.index; ++evaluated_) evaluate(nodes_[evaluated_]);
  return nodes_[root.index].value;
}

const DenseArray& Tape::forward() {
  if (nodes_.empty()) throw UsageError("forward() on an empty tape");
  return forward(NodeId{nodes_.size() - 1});
}

void Tape::propagate(const Node& n) {
  Node& la = nodes_[n.lhs.index];
  Node& lb = nodes_[n.rhs.index];
  const DenseArray& g = n.grad;
  const auto& gv = g.data();
  const bool ga = la.requires_grad;
  const bool gb = lb.requires_grad;
  switch (n.op) {
    case Op::Constant:
    case Op::Parameter: return;
    case Op::MatMul:
      if (ga) gemm_nt(g, lb.value, la.grad);  // G * B^T
      if (gb) gemm_tn(la.value, g, lb.grad);  // A^T * G
      return;
    case Op::MatMulNT:
      if (ga) gemm_nn(g, lb.value, la.grad);  // G * B
      if (gb) gemm_tn(g, la.value, lb.grad);  // G^T * A
      return;
    case Op::Add:
      if (ga) for (std::size_t i = 0; i < gv.size(); ++i) la.grad[i] += gv[i];
      if (gb) for (std::size_t i = 0; i < gv.size(); ++i) lb.grad[i] += gv[i];
      return;
    case Op::Sub:
      if (ga) for (std::size_t i = 0; i < gv.size(); ++i) la.grad[i] += gv[i];
      if (gb) for (std::size_t i = 0; i < gv.size(); ++i) lb.grad[i] -= gv[i];
      return;
    case Op::Mul:
      if (ga) for (std::size_t i = 0; i < gv.size(); ++i) la.grad[i] += gv[i] * lb.value[i];
      if (gb) for (std::size_t i = 0; i < gv.size(); ++i) lb.grad[i] += gv[i] * la.value[i];
      return;
    case Op::AddRow:
      if (ga) for (std::size_t i = 0; i < gv.size(); ++i) la.grad[i] += gv[i];
      if (gb) {
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) lb.grad[c] += g(r, c);
        }
      }
      return;
    case Op::Scale:
      for (std::size_t i = 0; i < gv.size(); ++i) la.grad[i] += gv[i] * n.scalar;
      return;
    case Op::AddScalar:
      for (std::size_t i = 0; i < gv.size(); ++i) la.grad[i] += gv[i];
      return;
    case Op::Exp:
      for (std::size_t i = 0; i < gv.size(); ++i) la.grad[i] += gv[i] * n.value[i];
      return;
    case Op::Log:
      for (std::size_t i = 0; i < gv.size(); ++i) la.grad[i] += gv[i] / la.value[i];
      return;
    case Op::Tanh:
      for (std::size_t i = 0; i < gv.size(); ++i) {
        la.grad[i] += gv[i] * (1.0 - n.value[i] * n.value[i]);
      }
      return;
    case Op::Square:
      for (std::size_t i = 0; i < gv.size(); ++i) la.grad[i] += 2.0 * la.value[i] * gv[i];
      return;
    case Op::Sum:
      for (std::size_t i = 0; i < la.grad.size(); ++i) la.grad[i] += gv[0];
      return;
    case Op::Dot:
      if (ga) for (std::size_t i = 0; i < la.grad.size(); ++i) la.grad[i] += gv[0] * lb.value[i];
      if (gb) for (std::size_t i = 0; i < lb.grad.size(); ++i) lb.grad[i] += gv[0] * la.value[i];
      return;
    case Op::L2NormalizeRows:
      // dx = (g - y (y.g)) / |x|
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const auto y = n.value.row_span(r);
        const auto gr = g.row_span(r);
        const double norm = l2_norm(la.value.row_span(r));
        const double yg = ucdir::dot(y, gr);
        for (std::size_t c = 0; c < g.cols(); ++c) la.grad(r, c) += (gr[c] - y[c] * yg) / norm;
      }
      return;
    case Op::LogSoftmaxRows:
      // dx = g - softmax * sum(g)
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const auto gr = g.row_span(r);
        double gs = 0.0;
        for (double v : gr) gs += v;
        for (std::size_t c = 0; c < g.cols(); ++c) {
          la.grad(r, c) += gr[c] - std::exp(n.value(r, c)) * gs;
        }
      }
      return;
  }
}

void Tape::backward(NodeId root) {
  const Node& r = node(root);
  if (!(r.shape == Shape{1, 1})) {
    throw UsageError("backward() requires a scalar root; node " + std::to_string(root.index) +
                     " has shape " + r.shape.str());
  }
  if (evaluated_ <= root.index) throw UsageError("backward() before forward() on node " +
                                                 std::to_string(root.index));
  for (auto& n : nodes_) {
    if (n.requires_grad) {
      n.grad = DenseArray(n.shape.rows, n.shape.cols);
    } else {
      n.grad = DenseArray();
    }
  }
  has_grad_ = true;
  if (!nodes_[root.index].requires_grad) return;
  nodes_[root.index].grad[0] = 1.0;
  for (std::size_t i = root.index + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.requires_grad) propagate(n);
  }
}

const DenseArray& Tape::value(NodeId id) const {
  if (id.index >= evaluated_) {
    throw UsageError("value of node " + std::to_string(id.index) + " requested before forward()");
  }
  return node(id).value;
}

const Shape& Tape::shape(NodeId id) const { return node(id).shape; }

bool Tape::requires_grad(NodeId id) const { return node(id).requires_grad; }

std::optional<DenseArray> Tape::gradient(NodeId id) const {
  const Node& n = node(id);
  if (!has_grad_ || !n.requires_grad) return std::nullopt;
  return n.grad;
}

std::vector<NodeId> Tape::parameters() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::Parameter) out.push_back(NodeId{i});
  }
  return out;
}

}  // namespace ucdir
