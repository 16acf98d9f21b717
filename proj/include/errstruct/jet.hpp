#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "errstruct/types.hpp"

namespace errstruct {

// Second-order forward-mode value: f, grad f and the dense hessian of f with
// respect to n seed coordinates. `order` selects how much is carried: 0 keeps
// only the value, 1 adds the gradient, 2 adds the hessian.
template <typename Scalar>
struct Jet {
  using VectorS = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Scalar value{0};
  VectorS gradient;
  MatrixS hessian;
  int order = 2;
  // Set when abs() was evaluated exactly at its kink.
  bool nondifferentiable = false;

  Jet() = default;

  static Jet constant(Scalar v, Eigen::Index n, int order = 2) {
    Jet j;
    j.order = order;
    j.value = v;
    if (order >= 1) j.gradient = VectorS::Zero(n);
    if (order >= 2) j.hessian = MatrixS::Zero(n, n);
    return j;
  }

  static Jet variable(Scalar v, Eigen::Index index, Eigen::Index n, int order = 2) {
    Jet j = constant(v, n, order);
    if (order >= 1) j.gradient(index) = Scalar(1);
    return j;
  }

  Eigen::Index dimension() const { return gradient.size(); }
};

namespace detail {

// out = f(u) given f(u), f'(u), f''(u). `out` may alias `u`.
template <typename Scalar>
void chain_into(Jet<Scalar>& out, const Jet<Scalar>& u, Scalar f, Scalar d1, Scalar d2) {
  const int order = u.order;
  if (order >= 2) {
    if (&out == &u) {
      out.hessian *= d1;
      out.hessian.noalias() += d2 * (u.gradient * u.gradient.transpose());
    } else {
      out.hessian = d1 * u.hessian;
      out.hessian.noalias() += d2 * (u.gradient * u.gradient.transpose());
    }
  }
  if (order >= 1) {
    if (&out == &u) out.gradient *= d1;
    else out.gradient = d1 * u.gradient;
  }
  out.value = f;
  out.order = order;
  out.nondifferentiable = u.nondifferentiable;
}

template <typename Scalar>
void add_into(Jet<Scalar>& out, const Jet<Scalar>& a, const Jet<Scalar>& b, Scalar sign) {
  const int order = a.order;
  if (order >= 2) out.hessian = a.hessian + sign * b.hessian;
  if (order >= 1) out.gradient = a.gradient + sign * b.gradient;
  out.value = a.value + sign * b.value;
  out.order = order;
  out.nondifferentiable = a.nondifferentiable || b.nondifferentiable;
}

template <typename Scalar>
void mul_into(Jet<Scalar>& out, const Jet<Scalar>& a, const Jet<Scalar>& b) {
  const int order = a.order;
  if (order >= 2) {
    out.hessian = a.value * b.hessian + b.value * a.hessian;
    out.hessian.noalias() += a.gradient * b.gradient.transpose();
    out.hessian.noalias() += b.gradient * a.gradient.transpose();
  }
  if (order >= 1) out.gradient = a.value * b.gradient + b.value * a.gradient;
  out.value = a.value * b.value;
  out.order = order;
  out.nondifferentiable = a.nondifferentiable || b.nondifferentiable;
}

inline bool is_integral(double x) { return std::abs(x - std::round(x)) < 1e-12; }

}  // namespace detail

template <typename Scalar>
Jet<Scalar> operator+(const Jet<Scalar>& a, const Jet<Scalar>& b) {
  Jet<Scalar> out;
  detail::add_into(out, a, b, Scalar(1));
  return out;
}

template <typename Scalar>
Jet<Scalar> operator-(const Jet<Scalar>& a, const Jet<Scalar>& b) {
  Jet<Scalar> out;
  detail::add_into(out, a, b, Scalar(-1));
  return out;
}

template <typename Scalar>
Jet<Scalar> operator-(const Jet<Scalar>& a) {
  Jet<Scalar> out;
  detail::chain_into(out, a, -a.value, Scalar(-1), Scalar(0));
  return out;
}

template <typename Scalar>
Jet<Scalar> operator*(const Jet<Scalar>& a, const Jet<Scalar>& b) {
  Jet<Scalar> out;
  detail::mul_into(out, a, b);
  return out;
}

// Value and first two derivatives of a scalar function at a point. Each rule
// throws DomainError outside the function's domain; `order` is the highest
// derivative the caller needs.
template <typename Scalar>
struct Derivatives {
  Scalar f;
  Scalar d1;
  Scalar d2;
  bool kink = false;
};

namespace rules {

template <typename Scalar>
Derivatives<Scalar> reciprocal(Scalar x, int) {
  if (x == Scalar(0)) throw DomainError("division by zero");
  const Scalar inv = Scalar(1) / x;
  return {inv, -inv * inv, Scalar(2) * inv * inv * inv};
}

template <typename Scalar>
Derivatives<Scalar> exp(Scalar x, int) {
  using std::exp;
  const Scalar e = exp(x);
  return {e, e, e};
}

template <typename Scalar>
Derivatives<Scalar> log(Scalar x, int) {
  using std::log;
  if (!(x > Scalar(0))) throw DomainError("log of non-positive argument");
  const Scalar inv = Scalar(1) / x;
  return {log(x), inv, -inv * inv};
}

template <typename Scalar>
Derivatives<Scalar> sin(Scalar x, int order) {
  using std::cos;
  using std::sin;
  const Scalar s = sin(x);
  return {s, order >= 1 ? cos(x) : Scalar(0), -s};
}

template <typename Scalar>
Derivatives<Scalar> cos(Scalar x, int order) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(x);
  return {c, order >= 1 ? -sin(x) : Scalar(0), -c};
}

// sqrt is differentiable only on the open half-line; sqrt(0) is allowed when
// no derivatives are requested.
template <typename Scalar>
Derivatives<Scalar> sqrt(Scalar x, int order) {
  using std::sqrt;
  if (x < Scalar(0)) throw DomainError("sqrt of negative argument");
  if (order == 0) return {sqrt(x), Scalar(0), Scalar(0)};
  if (x == Scalar(0)) throw DomainError("sqrt is not differentiable at 0");
  const Scalar r = sqrt(x);
  const Scalar d1 = Scalar(0.5) / r;
  return {r, d1, -d1 / (Scalar(2) * x)};
}

// Subgradient 0 at the kink.
template <typename Scalar>
Derivatives<Scalar> abs(Scalar x, int order) {
  if (x > Scalar(0)) return {x, Scalar(1), Scalar(0)};
  if (x < Scalar(0)) return {-x, Scalar(-1), Scalar(0)};
  return {Scalar(0), Scalar(0), Scalar(0), order >= 1};
}

// x^p for a fixed exponent p. Integral p accepts any base.
template <typename Scalar>
Derivatives<Scalar> power(Scalar x, Scalar p, int) {
  using std::pow;
  if (detail::is_integral(p)) {
    const Scalar k = std::round(p);
    if (x == Scalar(0) && k < Scalar(0)) throw DomainError("0 raised to a negative power");
    const Scalar d1 = k == Scalar(0) ? Scalar(0) : k * pow(x, k - Scalar(1));
    const Scalar d2 =
        (k == Scalar(0) || k == Scalar(1)) ? Scalar(0) : k * (k - Scalar(1)) * pow(x, k - Scalar(2));
    return {pow(x, k), d1, d2};
  }
  if (!(x > Scalar(0))) throw DomainError("non-integer power of a non-positive base");
  const Scalar f = pow(x, p);
  return {f, p * f / x, p * (p - Scalar(1)) * f / (x * x)};
}

}  // namespace rules

namespace detail {

template <typename Scalar>
void apply_into(Jet<Scalar>& out, const Jet<Scalar>& u, const Derivatives<Scalar>& d) {
  chain_into(out, u, d.f, d.d1, d.d2);
  if (d.kink) out.nondifferentiable = true;
}

template <typename Scalar>
bool depends_on_seeds(const Jet<Scalar>& a) {
  if (a.order == 0) return false;
  return !a.gradient.isZero(0) || (a.order >= 2 && !a.hessian.isZero(0));
}

}  // namespace detail

#define ERRSTRUCT_JET_UNARY(name)                                  \
  template <typename Scalar>                                       \
  Jet<Scalar> name(const Jet<Scalar>& a) {                         \
    Jet<Scalar> out;                                               \
    detail::apply_into(out, a, rules::name(a.value, a.order));     \
    return out;                                                    \
  }

ERRSTRUCT_JET_UNARY(reciprocal)
ERRSTRUCT_JET_UNARY(exp)
ERRSTRUCT_JET_UNARY(log)
ERRSTRUCT_JET_UNARY(sin)
ERRSTRUCT_JET_UNARY(cos)
ERRSTRUCT_JET_UNARY(sqrt)
ERRSTRUCT_JET_UNARY(abs)

#undef ERRSTRUCT_JET_UNARY

template <typename Scalar>
Jet<Scalar> operator/(const Jet<Scalar>& a, const Jet<Scalar>& b) {
  return a * reciprocal(b);
}

// base^exponent. An exponent that does not depend on the seed coordinates is a
// fixed power (see rules::power); otherwise the base must be positive and the
// result is exp(exponent * log(base)).
template <typename Scalar>
Jet<Scalar> pow(const Jet<Scalar>& base, const Jet<Scalar>& exponent) {
  if (!detail::depends_on_seeds(exponent)) {
    Jet<Scalar> out;
    detail::apply_into(out, base, rules::power(base.value, exponent.value, base.order));
    out.nondifferentiable = out.nondifferentiable || exponent.nondifferentiable;
    return out;
  }
  if (!(base.value > Scalar(0))) {
    throw DomainError("variable power of a non-positive base");
  }
  return exp(exponent * log(base));
}

}  // namespace errstruct
