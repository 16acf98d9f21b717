#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

#include "errstruct/expression.hpp"

namespace errstruct {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::optional<UnaryOp> function_named(std::string_view name) {
  if (name == "exp") return UnaryOp::Exp;
  if (name == "log") return UnaryOp::Log;
  if (name == "sin") return UnaryOp::Sin;
  if (name == "cos") return UnaryOp::Cos;
  if (name == "sqrt") return UnaryOp::Sqrt;
  if (name == "abs") return UnaryOp::Abs;
  return std::nullopt;
}

class Parser {
 public:
  Parser(std::string_view text, std::span<const std::string> vars) : text_(text), vars_(vars) {}

  Expr parse() {
    Expr e = parse_sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError("syntax error: " + message, pos_);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool accept(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) fail(std::string("expected '") + c + "' before end of input");
      fail(std::string("expected '") + c + "'");
    }
  }

  Expr parse_sum() {
    Expr lhs = parse_product();
    for (;;) {
      if (accept('+')) lhs = Expr::binary(BinaryOp::Add, lhs, parse_product());
      else if (accept('-')) lhs = Expr::binary(BinaryOp::Sub, lhs, parse_product());
      else return lhs;
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*')) lhs = Expr::binary(BinaryOp::Mul, lhs, parse_unary());
      else if (accept('/')) lhs = Expr::binary(BinaryOp::Div, lhs, parse_unary());
      else return lhs;
    }
  }

  Expr parse_unary() {
    if (accept('-')) return Expr::unary(UnaryOp::Neg, parse_unary());
    return parse_power();
  }

  // The exponent is a unary expression, which makes `^` right-associative and
  // lets `x^-2` parse.
  Expr parse_power() {
    Expr base = parse_primary();
    if (accept('^')) return Expr::binary(BinaryOp::Pow, base, parse_unary());
    return base;
  }

  bool number_at(std::size_t p) const {
    if (p >= text_.size()) return false;
    if (is_digit(text_[p])) return true;
    return text_[p] == '.' && p + 1 < text_.size() && is_digit(text_[p + 1]);
  }

  double parse_number() {
    const std::size_t start = pos_;
    std::size_t p = pos_;
    while (p < text_.size() && is_digit(text_[p])) ++p;
    if (p < text_.size() && text_[p] == '.') {
      ++p;
      while (p < text_.size() && is_digit(text_[p])) ++p;
    }
    if (p < text_.size() && (text_[p] == 'e' || text_[p] == 'E')) {
      std::size_t q = p + 1;
      if (q < text_.size() && (text_[q] == '+' || text_[q] == '-')) ++q;
      if (q < text_.size() && is_digit(text_[q])) {
        while (q < text_.size() && is_digit(text_[q])) ++q;
        p = q;
      }
    }
    double value = 0;
    auto [end, ec] = std::from_chars(text_.data() + start, text_.data() + p, value);
    if (ec != std::errc() || end != text_.data() + p) fail("malformed number");
    if (!std::isfinite(value)) fail("number out of range");
    pos_ = p;
    return value;
  }

  // '(' '-' NUMBER ')' with nothing else inside is a negative constant.
  std::optional<Expr> try_negative_constant() {
    const std::size_t saved = pos_;
    ++pos_;  // '('
    if (peek() == '-') {
      ++pos_;
      skip_space();
      if (number_at(pos_)) {
        const double v = parse_number();
        if (peek() == ')') {
          ++pos_;
          return Expr::constant(-v);
        }
      }
    }
    pos_ = saved;
    return std::nullopt;
  }

  Expr parse_primary() {
    const char c = peek();
    if (c == '\0') fail("unexpected end of input");
    if (number_at(pos_)) return Expr::constant(parse_number());
    if (c == '(') {
      if (auto constant = try_negative_constant()) return *constant;
      ++pos_;
      Expr inner = parse_sum();
      expect(')');
      return inner;
    }
    if (is_ident_start(c)) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
      const std::string name(text_.substr(start, pos_ - start));
      if (peek() == '(') {
        auto op = function_named(name);
        if (!op) throw UnknownIdentifier(name, start);
        ++pos_;
        Expr arg = parse_sum();
        expect(')');
        return Expr::unary(*op, arg);
      }
      for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (vars_[i] == name) return Expr::variable(i, name);
      }
      throw UnknownIdentifier(name, start);
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  std::string_view text_;
  std::span<const std::string> vars_;
  std::size_t pos_ = 0;
};

void check_variable_list(std::span<const std::string> vars) {
  if (vars.empty()) throw PreconditionError("variable list must not be empty");
  if (vars.size() > kMaxDimension) throw PreconditionError("at most 64 variables are supported");
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::string& v = vars[i];
    if (v.empty() || !is_ident_start(v[0])) {
      throw PreconditionError("'" + v + "' is not an identifier");
    }
    for (char ch : v) {
      if (!is_ident_char(ch)) throw PreconditionError("'" + v + "' is not an identifier");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (vars[j] == v) throw PreconditionError("duplicate variable '" + v + "'");
    }
  }
}

}  // namespace

Expr parse(std::string_view text, std::span<const std::string> vars) {
  check_variable_list(vars);
  bool blank = true;
  for (char ch : text) blank = blank && std::isspace(static_cast<unsigned char>(ch));
  if (blank) throw ParseError("syntax error: empty expression", 0);
  return Parser(text, vars).parse();
}

}  // namespace errstruct
