#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errstruct/jet.hpp"
#include "errstruct/types.hpp"

namespace errstruct {

enum class UnaryOp { Neg, Exp, Log, Sin, Cos, Sqrt, Abs };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

struct ExprNode;

// Immutable expression tree over indexed variables. Copies share nodes.
class Expr {
 public:
  enum class Kind { Constant, Variable, Unary, Binary };

  static Expr constant(double value);
  static Expr variable(std::size_t index, std::string name);
  static Expr unary(UnaryOp op, Expr child);
  static Expr binary(BinaryOp op, Expr left, Expr right);

  Kind kind() const;
  double constant_value() const;
  std::size_t variable_index() const;
  const std::string& variable_name() const;
  UnaryOp unary_op() const;
  BinaryOp binary_op() const;
  const Expr& child() const;
  const Expr& left() const;
  const Expr& right() const;

  // Identity of the shared node, used for hashing in the tape compiler.
  const ExprNode* id() const { return node_.get(); }

  // Structural equality.
  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const ExprNode> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& base, const Expr& exponent);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr sqrt(const Expr& a);
Expr abs(const Expr& a);

const char* to_string(UnaryOp op);
const char* to_string(BinaryOp op);

// Grammar, loosest to tightest: `+ -` (left), `* /` (left), unary minus,
// `^` (right). Calls `name(expr)` for exp, log, sin, cos, sqrt, abs. The
// canonical form writes negative constants as `(-2.5)`, which parses back to a
// single constant node.
Expr parse(std::string_view text, std::span<const std::string> vars);

// Fully parenthesized form; parse(print_canonical(e), vars) == e.
std::string print_canonical(const Expr& e);

// Smallest point length that covers every variable index (0 for closed expressions).
std::size_t required_dimension(const Expr& e);

// Replaces variable i by replacements[i].
Expr substitute(const Expr& e, std::span<const Expr> replacements);

bool contains_abs(const Expr& e);

// Value only. sqrt(0) is allowed here.
double evaluate(const Expr& e, const Vector& point);

// Value and gradient.
Jet<double> eval1(const Expr& e, const Vector& point);

// Value, gradient and hessian, exactly symmetric.
Jet<double> eval2(const Expr& e, const Vector& point);

// Flattened DAG of one or more expressions with structurally identical
// subtrees merged. Evaluating a family F_1..F_K that shares prefixes costs
// the size of the union rather than the sum of sizes.
class Tape {
 public:
  explicit Tape(std::span<const Expr> roots);
  explicit Tape(const Expr& root) : Tape(std::span<const Expr>(&root, 1)) {}

  struct Workspace {
    std::vector<double> values;
    std::vector<Jet<double>> jets;
  };

  std::size_t size() const { return nodes_.size(); }
  std::size_t outputs() const { return roots_.size(); }
  std::size_t required_dimension() const { return dimension_; }

  void evaluate_values(const double* point, Workspace& ws) const;
  double value(std::size_t output, const Workspace& ws) const { return ws.values[roots_[output]]; }

  // order 1 or 2. Hessians are mirrored from the upper triangle.
  void evaluate_jets(const Vector& point, int order, Workspace& ws) const;
  const Jet<double>& jet(std::size_t output, const Workspace& ws) const {
    return ws.jets[roots_[output]];
  }

 private:
  struct Node {
    Expr::Kind kind;
    int op;
    std::size_t a;
    std::size_t b;
    double constant;
  };
  std::vector<Node> nodes_;
  std::vector<std::size_t> roots_;
  std::size_t dimension_ = 0;
};

}  // namespace errstruct
