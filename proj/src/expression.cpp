#include "errstruct/expression.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <variant>

namespace errstruct {

struct ExprNode {
  struct Constant {
    double value;
  };
  struct Variable {
    std::size_t index;
    std::string name;
  };
  struct Unary {
    UnaryOp op;
    Expr child;
  };
  struct Binary {
    BinaryOp op;
    Expr left;
    Expr right;
  };
  std::variant<Constant, Variable, Unary, Binary> data;
};

Expr Expr::constant(double value) {
  if (!std::isfinite(value)) throw PreconditionError("expression constants must be finite");
  return Expr(std::make_shared<const ExprNode>(ExprNode{ExprNode::Constant{value}}));
}

Expr Expr::variable(std::size_t index, std::string name) {
  if (index >= kMaxDimension) throw DimensionMismatch("variable index exceeds the dimension cap");
  return Expr(std::make_shared<const ExprNode>(ExprNode{ExprNode::Variable{index, std::move(name)}}));
}

Expr Expr::unary(UnaryOp op, Expr child) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{ExprNode::Unary{op, std::move(child)}}));
}

Expr Expr::binary(BinaryOp op, Expr left, Expr right) {
  return Expr(std::make_shared<const ExprNode>(
      ExprNode{ExprNode::Binary{op, std::move(left), std::move(right)}}));
}

Expr::Kind Expr::kind() const { return static_cast<Kind>(node_->data.index()); }
double Expr::constant_value() const { return std::get<ExprNode::Constant>(node_->data).value; }
std::size_t Expr::variable_index() const { return std::get<ExprNode::Variable>(node_->data).index; }
const std::string& Expr::variable_name() const {
  return std::get<ExprNode::Variable>(node_->data).name;
}
UnaryOp Expr::unary_op() const { return std::get<ExprNode::Unary>(node_->data).op; }
BinaryOp Expr::binary_op() const { return std::get<ExprNode::Binary>(node_->data).op; }
const Expr& Expr::child() const { return std::get<ExprNode::Unary>(node_->data).child; }
const Expr& Expr::left() const { return std::get<ExprNode::Binary>(node_->data).left; }
const Expr& Expr::right() const { return std::get<ExprNode::Binary>(node_->data).right; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Expr::Kind::Constant:
      return a.constant_value() == b.constant_value();
    case Expr::Kind::Variable:
      return a.variable_index() == b.variable_index() && a.variable_name() == b.variable_name();
    case Expr::Kind::Unary:
      return a.unary_op() == b.unary_op() && a.child() == b.child();
    case Expr::Kind::Binary:
      return a.binary_op() == b.binary_op() && a.left() == b.left() && a.right() == b.right();
  }
  return false;
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::Add, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::Sub, a, b); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::Mul, a, b); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::Div, a, b); }
Expr operator-(const Expr& a) { return Expr::unary(UnaryOp::Neg, a); }
Expr pow(const Expr& base, const Expr& exponent) {
  return Expr::binary(BinaryOp::Pow, base, exponent);
}
Expr exp(const Expr& a) { return Expr::unary(UnaryOp::Exp, a); }
Expr log(const Expr& a) { return Expr::unary(UnaryOp::Log, a); }
Expr sin(const Expr& a) { return Expr::unary(UnaryOp::Sin, a); }
Expr cos(const Expr& a) { return Expr::unary(UnaryOp::Cos, a); }
Expr sqrt(const Expr& a) { return Expr::unary(UnaryOp::Sqrt, a); }
Expr abs(const Expr& a) { return Expr::unary(UnaryOp::Abs, a); }

const char* to_string(UnaryOp op) {
  switch (op) {
    case UnaryOp::Neg: return "-";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Log: return "log";
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Sqrt: return "sqrt";
    case UnaryOp::Abs: return "abs";
  }
  return "?";
}

const char* to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Pow: return "^";
  }
  return "?";
}

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void print_into(const Expr& e, std::string& out) {
  switch (e.kind()) {
    case Expr::Kind::Constant: {
      const double v = e.constant_value();
      if (std::signbit(v)) {
        out += "(-";
        out += shortest(-v);
        out += ')';
      } else {
        out += shortest(v);
      }
      return;
    }
    case Expr::Kind::Variable:
      out += e.variable_name();
      return;
    case Expr::Kind::Unary:
      if (e.unary_op() == UnaryOp::Neg) {
        // "(-2.5)" is reserved for negative constants.
        const bool wrap = e.child().kind() == Expr::Kind::Constant;
        out += "(-";
        if (wrap) out += '(';
        print_into(e.child(), out);
        if (wrap) out += ')';
        out += ')';
      } else {
        out += to_string(e.unary_op());
        out += '(';
        print_into(e.child(), out);
        out += ')';
      }
      return;
    case Expr::Kind::Binary:
      out += '(';
      print_into(e.left(), out);
      out += ' ';
      out += to_string(e.binary_op());
      out += ' ';
      print_into(e.right(), out);
      out += ')';
      return;
  }
}

}  // namespace

std::string print_canonical(const Expr& e) {
  std::string out;
  print_into(e, out);
  return out;
}

std::size_t required_dimension(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Constant: return 0;
    case Expr::Kind::Variable: return e.variable_index() + 1;
    case Expr::Kind::Unary: return required_dimension(e.child());
    case Expr::Kind::Binary:
      return std::max(required_dimension(e.left()), required_dimension(e.right()));
  }
  return 0;
}

Expr substitute(const Expr& e, std::span<const Expr> replacements) {
  switch (e.kind()) {
    case Expr::Kind::Constant:
      return e;
    case Expr::Kind::Variable:
      if (e.variable_index() >= replacements.size()) {
        throw DimensionMismatch("no replacement for variable '" + e.variable_name() + "'");
      }
      return replacements[e.variable_index()];
    case Expr::Kind::Unary:
      return Expr::unary(e.unary_op(), substitute(e.child(), replacements));
    case Expr::Kind::Binary:
      return Expr::binary(e.binary_op(), substitute(e.left(), replacements),
                          substitute(e.right(), replacements));
  }
  return e;
}

bool contains_abs(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Constant:
    case Expr::Kind::Variable:
      return false;
    case Expr::Kind::Unary:
      return e.unary_op() == UnaryOp::Abs || contains_abs(e.child());
    case Expr::Kind::Binary:
      return contains_abs(e.left()) || contains_abs(e.right());
  }
  return false;
}

double evaluate(const Expr& e, const Vector& point) {
  Tape tape(e);
  if (tape.required_dimension() > static_cast<std::size_t>(point.size())) {
    throw DimensionMismatch("point has fewer coordinates than the expression uses");
  }
  Tape::Workspace ws;
  tape.evaluate_values(point.data(), ws);
  return tape.value(0, ws);
}

namespace {

Jet<double> eval_order(const Expr& e, const Vector& point, int order) {
  if (point.size() == 0 || static_cast<std::size_t>(point.size()) > kMaxDimension) {
    throw DimensionMismatch("point dimension must be in [1, 64]");
  }
  Tape tape(e);
  if (tape.required_dimension() > static_cast<std::size_t>(point.size())) {
    throw DimensionMismatch("point has fewer coordinates than the expression uses");
  }
  Tape::Workspace ws;
  tape.evaluate_jets(point, order, ws);
  return tape.jet(0, ws);
}

}  // namespace

Jet<double> eval1(const Expr& e, const Vector& point) { return eval_order(e, point, 1); }
Jet<double> eval2(const Expr& e, const Vector& point) { return eval_order(e, point, 2); }

}  // namespace errstruct
