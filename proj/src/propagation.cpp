#include "errstruct/propagation.hpp"

#include "errstruct/psd.hpp"

namespace errstruct {

namespace {

void check_same_frame(const Quantity& x, const Quantity& y) {
  if (x.frame_tag != y.frame_tag || x.gradient.size() != y.gradient.size()) {
    throw DimensionMismatch("quantities were built on different frames");
  }
}

void check_fits(const Expr& e, const Frame& f) {
  if (required_dimension(e) > static_cast<std::size_t>(f.dimension())) {
    throw DimensionMismatch("expression uses more coordinates than the frame has");
  }
}

double bias_of(const Jet<double>& j, const Frame& f) {
  return j.gradient.dot(f.bias) + 0.5 * j.hessian.cwiseProduct(f.gamma).sum();
}

}  // namespace

Quantity lift(const Frame& f, std::size_t i) {
  if (i >= static_cast<std::size_t>(f.dimension())) throw DimensionMismatch("no such coordinate");
  Quantity q;
  q.value = f.point(static_cast<Eigen::Index>(i));
  q.gradient = Vector::Unit(f.dimension(), static_cast<Eigen::Index>(i));
  q.bias = 0.0;
  q.frame_tag = fingerprint(f);
  return q;
}

Quantity operator+(const Quantity& x, const Quantity& y) {
  check_same_frame(x, y);
  return {x.value + y.value, x.gradient + y.gradient, x.bias + y.bias,
          x.nondifferentiable || y.nondifferentiable, x.frame_tag};
}

Quantity operator*(double a, const Quantity& x) {
  return {a * x.value, a * x.gradient, a * x.bias, x.nondifferentiable, x.frame_tag};
}

Quantity propagate(const Expr& e, const Frame& f) {
  validate(f);
  check_fits(e, f);
  const Jet<double> j = eval2(e, f.point);
  return {j.value, j.gradient, bias_of(j, f), j.nondifferentiable, fingerprint(f)};
}

double gamma(const Quantity& x, const Quantity& y, const Frame& f) {
  check_same_frame(x, y);
  if (x.frame_tag != fingerprint(f)) throw DimensionMismatch("quantities belong to another frame");
  // Pairs (i, j) and (j, i) are summed together so that swapping x and y
  // gives a bitwise-identical result.
  const Vector& a = x.gradient;
  const Vector& b = y.gradient;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    sum += a(i) * b(i) * f.gamma(i, i);
    for (Eigen::Index j = i + 1; j < a.size(); ++j) {
      sum += (a(i) * b(j) + a(j) * b(i)) * f.gamma(i, j);
    }
  }
  return sum;
}

double verify_carre_identity(const Expr& e, const Frame& f) {
  const Quantity u = propagate(e, f);
  const Quantity u2 = propagate(e * e, f);
  return u2.bias - 2.0 * u.value * u.bias - gamma(u, u, f);
}

Transport pushforward(std::span<const Expr> map, const Frame& f) {
  validate(f);
  if (map.empty() || map.size() > kMaxDimension) {
    throw DimensionMismatch("map must have between 1 and 64 components");
  }
  for (const Expr& e : map) check_fits(e, f);
  Tape tape(map);
  Tape::Workspace ws;
  tape.evaluate_jets(f.point, 2, ws);

  const auto m = static_cast<Eigen::Index>(map.size());
  Vector point(m);
  Vector bias(m);
  Matrix jacobian(m, f.dimension());
  bool kink = false;
  for (Eigen::Index k = 0; k < m; ++k) {
    const Jet<double>& j = tape.jet(static_cast<std::size_t>(k), ws);
    point(k) = j.value;
    jacobian.row(k) = j.gradient.transpose();
    bias(k) = bias_of(j, f);
    kink = kink || j.nondifferentiable;
  }
  Matrix image = jacobian * f.gamma * jacobian.transpose();
  auto projected = project_psd(image, "transported gamma");
  return {Frame{point, std::move(projected.matrix), bias}, projected.clipped, kink};
}

NaiveChain propagate_naive(std::span<const std::vector<Expr>> stages, const ErrorStructure& s,
                           const Vector& point) {
  NaiveChain chain;
  Vector errors = sigma_at(s, point).diagonal().cwiseSqrt();
  Vector current = point;
  chain.stage_errors.push_back(errors);
  chain.stage_points.push_back(current);
  for (const auto& stage : stages) {
    if (stage.empty()) throw PreconditionError("naive chain stage has no components");
    Tape tape(stage);
    if (tape.required_dimension() > static_cast<std::size_t>(current.size())) {
      throw DimensionMismatch("stage uses more coordinates than the previous stage produced");
    }
    Tape::Workspace ws;
    tape.evaluate_jets(current, 1, ws);
    Vector next_point(static_cast<Eigen::Index>(stage.size()));
    Vector next_errors(static_cast<Eigen::Index>(stage.size()));
    for (std::size_t k = 0; k < stage.size(); ++k) {
      const Jet<double>& j = tape.jet(k, ws);
      next_point(static_cast<Eigen::Index>(k)) = j.value;
      next_errors(static_cast<Eigen::Index>(k)) = j.gradient.cwiseAbs().dot(errors);
    }
    current = std::move(next_point);
    errors = std::move(next_errors);
    chain.stage_errors.push_back(errors);
    chain.stage_points.push_back(current);
  }
  return chain;
}

}  // namespace errstruct
