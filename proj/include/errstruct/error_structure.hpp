#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "errstruct/expression.hpp"
#include "errstruct/types.hpp"

namespace errstruct {

// Covariance fields sigma_ij(v) on the coordinates.
struct DiagonalCovariance {
  Vector variances;
};

struct FullCovariance {
  Matrix matrix;
};

// Upper triangle, row-major: (0,0), (0,1), ..., (0,n-1), (1,1), ... Mirrored.
struct ExpressionCovariance {
  std::vector<Expr> upper;
};

using CovarianceField = std::variant<DiagonalCovariance, FullCovariance, ExpressionCovariance>;

// Base probability laws.
struct UniformBox {
  Vector lower;
  Vector upper;
};

struct IndependentGaussians {
  Vector mean;
  Vector sd;
};

// Deterministic composite-midpoint rule on [lower, upper]; one dimension only.
struct Grid1d {
  double lower;
  double upper;
  std::size_t points;
};

using BaseLaw = std::variant<UniformBox, IndependentGaussians, Grid1d>;

// Desk-scale error structure: named coordinates, a covariance field for their
// errors and an optional base law used for expectations.
class ErrorStructure {
 public:
  ErrorStructure(std::vector<std::string> names, CovarianceField covariance,
                 std::optional<BaseLaw> law = std::nullopt);

  std::size_t dimension() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const CovarianceField& covariance() const { return covariance_; }
  const std::optional<BaseLaw>& law() const { return law_; }

  // Parses an expression over this structure's coordinates.
  Expr parse(std::string_view text) const;

 private:
  std::vector<std::string> names_;
  CovarianceField covariance_;
  std::optional<BaseLaw> law_;
};

// Evaluation context: a point, the covariance of the errors on the current
// coordinates and their biases.
struct Frame {
  Vector point;
  Matrix gamma;
  Vector bias;

  Eigen::Index dimension() const { return point.size(); }
};

// Throws unless sizes agree, entries are finite and gamma is symmetric PSD
// within kPsdTolerance.
void validate(const Frame& frame);

// Content hash used to detect quantities built on different frames.
std::uint64_t fingerprint(const Frame& frame);

struct CovarianceAt {
  Matrix matrix;
  double min_eigenvalue;
  double clipped;
};

// Covariance field at a point: symmetric, PSD-checked, clipped.
Matrix sigma_at(const ErrorStructure& s, const Vector& point);
CovarianceAt sigma_at_detailed(const ErrorStructure& s, const Vector& point);

// Coordinates are linear, so their bias is zero.
Frame base_frame(const ErrorStructure& s, const Vector& point);

// `count` draws from the base law, one per column. Deterministic in (seed,
// count) and independent of `workers`.
Matrix sample_base(const ErrorStructure& s, std::size_t count, std::uint64_t seed,
                   unsigned workers = 1);

}  // namespace errstruct
