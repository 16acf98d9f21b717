#include <bit>
#include <cstring>
#include <map>
#include <tuple>
#include <unordered_map>

#include "errstruct/expression.hpp"

namespace errstruct {

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

using NodeKey = std::tuple<int, int, std::size_t, std::size_t, std::uint64_t>;

class Compiler {
 public:
  explicit Compiler(std::vector<std::size_t>& dims) : dims_(dims) {}

  template <typename Node>
  std::size_t add(const Expr& e, std::vector<Node>& nodes) {
    if (auto it = seen_.find(e.id()); it != seen_.end()) return it->second;
    Node n{e.kind(), 0, kNone, kNone, 0.0};
    switch (e.kind()) {
      case Expr::Kind::Constant:
        n.constant = e.constant_value();
        break;
      case Expr::Kind::Variable:
        n.op = static_cast<int>(e.variable_index());
        dims_.push_back(e.variable_index() + 1);
        break;
      case Expr::Kind::Unary:
        n.op = static_cast<int>(e.unary_op());
        n.a = add(e.child(), nodes);
        break;
      case Expr::Kind::Binary:
        n.op = static_cast<int>(e.binary_op());
        n.a = add(e.left(), nodes);
        n.b = add(e.right(), nodes);
        break;
    }
    const NodeKey key{static_cast<int>(n.kind), n.op, n.a, n.b,
                      std::bit_cast<std::uint64_t>(n.constant)};
    auto [it, inserted] = unique_.try_emplace(key, nodes.size());
    if (inserted) nodes.push_back(n);
    seen_.emplace(e.id(), it->second);
    return it->second;
  }

 private:
  std::vector<std::size_t>& dims_;
  std::map<NodeKey, std::size_t> unique_;
  std::unordered_map<const ExprNode*, std::size_t> seen_;
};

}  // namespace

Tape::Tape(std::span<const Expr> roots) {
  std::vector<std::size_t> dims;
  Compiler compiler(dims);
  roots_.reserve(roots.size());
  for (const Expr& r : roots) roots_.push_back(compiler.add(r, nodes_));
  for (std::size_t d : dims) dimension_ = std::max(dimension_, d);
}

void Tape::evaluate_values(const double* point, Workspace& ws) const {
  ws.values.resize(nodes_.size());
  double* v = ws.values.data();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    switch (n.kind) {
      case Expr::Kind::Constant:
        v[i] = n.constant;
        break;
      case Expr::Kind::Variable:
        v[i] = point[n.op];
        break;
      case Expr::Kind::Unary: {
        const double x = v[n.a];
        switch (static_cast<UnaryOp>(n.op)) {
          case UnaryOp::Neg: v[i] = -x; break;
          case UnaryOp::Exp: v[i] = rules::exp(x, 0).f; break;
          case UnaryOp::Log: v[i] = rules::log(x, 0).f; break;
          case UnaryOp::Sin: v[i] = std::sin(x); break;
          case UnaryOp::Cos: v[i] = std::cos(x); break;
          case UnaryOp::Sqrt: v[i] = rules::sqrt(x, 0).f; break;
          case UnaryOp::Abs: v[i] = std::abs(x); break;
        }
        break;
      }
      case Expr::Kind::Binary: {
        const double x = v[n.a];
        const double y = v[n.b];
        switch (static_cast<BinaryOp>(n.op)) {
          case BinaryOp::Add: v[i] = x + y; break;
          case BinaryOp::Sub: v[i] = x - y; break;
          case BinaryOp::Mul: v[i] = x * y; break;
          case BinaryOp::Div:
            if (y == 0.0) throw DomainError("division by zero");
            v[i] = x / y;
            break;
          case BinaryOp::Pow: v[i] = rules::power(x, y, 0).f; break;
        }
        break;
      }
    }
  }
}

void Tape::evaluate_jets(const Vector& point, int order, Workspace& ws) const {
  const Eigen::Index dim = point.size();
  ws.jets.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    Jet<double>& out = ws.jets[i];
    switch (n.kind) {
      case Expr::Kind::Constant:
      case Expr::Kind::Variable: {
        out.order = order;
        out.nondifferentiable = false;
        out.gradient.setZero(dim);
        if (order >= 2) out.hessian.setZero(dim, dim);
        if (n.kind == Expr::Kind::Constant) {
          out.value = n.constant;
        } else {
          out.value = point(n.op);
          out.gradient(n.op) = 1.0;
        }
        break;
      }
      case Expr::Kind::Unary: {
        const Jet<double>& u = ws.jets[n.a];
        switch (static_cast<UnaryOp>(n.op)) {
          case UnaryOp::Neg: detail::chain_into(out, u, -u.value, -1.0, 0.0); break;
          case UnaryOp::Exp: detail::apply_into(out, u, rules::exp(u.value, order)); break;
          case UnaryOp::Log: detail::apply_into(out, u, rules::log(u.value, order)); break;
          case UnaryOp::Sin: detail::apply_into(out, u, rules::sin(u.value, order)); break;
          case UnaryOp::Cos: detail::apply_into(out, u, rules::cos(u.value, order)); break;
          case UnaryOp::Sqrt: detail::apply_into(out, u, rules::sqrt(u.value, order)); break;
          case UnaryOp::Abs: detail::apply_into(out, u, rules::abs(u.value, order)); break;
        }
        break;
      }
      case Expr::Kind::Binary: {
        const Jet<double>& a = ws.jets[n.a];
        const Jet<double>& b = ws.jets[n.b];
        switch (static_cast<BinaryOp>(n.op)) {
          case BinaryOp::Add: detail::add_into(out, a, b, 1.0); break;
          case BinaryOp::Sub: detail::add_into(out, a, b, -1.0); break;
          case BinaryOp::Mul: detail::mul_into(out, a, b); break;
          case BinaryOp::Div: {
            Jet<double> inv;
            detail::apply_into(inv, b, rules::reciprocal(b.value, order));
            detail::mul_into(out, a, inv);
            break;
          }
          case BinaryOp::Pow: out = pow(a, b); break;
        }
        break;
      }
    }
  }
  if (order >= 2) {
    for (std::size_t r : roots_) {
      Matrix& h = ws.jets[r].hessian;
      h.triangularView<Eigen::StrictlyLower>() = h.transpose();
    }
  }
}

}  // namespace errstruct
