#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "errstruct/error_structure.hpp"
#include "errstruct/expression.hpp"

namespace errstruct {

// An erroneous quantity U = F(V) seen from a frame: its value, dF/dV at the
// frame point and its bias LF.
struct Quantity {
  double value = 0.0;
  Vector gradient;
  double bias = 0.0;
  bool nondifferentiable = false;
  std::uint64_t frame_tag = 0;
};

// Coordinate i of the frame as a quantity (basis gradient, zero bias).
Quantity lift(const Frame& f, std::size_t i);

// Linear combinations a*X + b*Y of quantities on the same frame.
Quantity operator+(const Quantity& x, const Quantity& y);
Quantity operator*(double a, const Quantity& x);

// value = F(point), gradient = grad F,
// bias = grad F . frame.bias + 1/2 sum_kl d2F/dVk dVl gamma_kl.
Quantity propagate(const Expr& e, const Frame& f);

// Carre du champ: grad_x^T gamma grad_y.
double gamma(const Quantity& x, const Quantity& y, const Frame& f);

// L(F^2) - 2 F LF - Gamma[F]; zero up to rounding.
double verify_carre_identity(const Expr& e, const Frame& f);

struct Transport {
  Frame frame;
  // Largest eigenvalue lift applied when flooring the image covariance at 0.
  double clipped = 0.0;
  bool nondifferentiable = false;
};

// Image of a frame under the map u = (u_1..u_m). Injectivity is assumed, not checked.
Transport pushforward(std::span<const Expr> map, const Frame& f);

struct NaiveChain {
  // Per-coordinate error after each stage; stage_errors[0] is the input.
  std::vector<Vector> stage_errors;
  std::vector<Vector> stage_points;
  const Vector& errors() const { return stage_errors.back(); }
};

// The first-order absolute-value rule sigma_U = sum_i |dF/dV_i| sigma_i
// applied stage by stage. Ignores covariances, and its result depends on how
// a map is factored into stages.
NaiveChain propagate_naive(std::span<const std::vector<Expr>> stages, const ErrorStructure& s,
                           const Vector& point);

}  // namespace errstruct
