#include "errstruct/error_structure.hpp"

#include <bit>
#include <cmath>

#include "errstruct/psd.hpp"
#include "errstruct/random.hpp"

namespace errstruct {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw PreconditionError(message);
}

void check_law(const BaseLaw& law, std::size_t n) {
  std::visit(
      [n](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, UniformBox>) {
          require(static_cast<std::size_t>(l.lower.size()) == n &&
                      static_cast<std::size_t>(l.upper.size()) == n,
                  "uniform law needs one interval per coordinate");
          require(l.lower.allFinite() && l.upper.allFinite() && (l.lower.array() < l.upper.array()).all(),
                  "uniform law intervals must be finite with lower < upper");
        } else if constexpr (std::is_same_v<T, IndependentGaussians>) {
          require(static_cast<std::size_t>(l.mean.size()) == n &&
                      static_cast<std::size_t>(l.sd.size()) == n,
                  "gaussian law needs one mean and sd per coordinate");
          require(l.mean.allFinite() && l.sd.allFinite() && (l.sd.array() >= 0.0).all(),
                  "gaussian law needs finite means and nonnegative sds");
        } else {
          require(n == 1, "grid law is one-dimensional");
          require(std::isfinite(l.lower) && std::isfinite(l.upper) && l.lower < l.upper,
                  "grid interval must be finite with lower < upper");
          require(l.points >= 1, "grid needs at least one point");
        }
      },
      law);
}

}  // namespace

ErrorStructure::ErrorStructure(std::vector<std::string> names, CovarianceField covariance,
                               std::optional<BaseLaw> law)
    : names_(std::move(names)), covariance_(std::move(covariance)), law_(std::move(law)) {
  const std::size_t n = names_.size();
  require(n >= 1 && n <= kMaxDimension, "dimension must be in [1, 64]");
  // Reuses the parser's identifier checks.
  (void)errstruct::parse("0", names_);

  std::visit(
      [n](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DiagonalCovariance>) {
          require(static_cast<std::size_t>(c.variances.size()) == n,
                  "diagonal covariance needs one variance per coordinate");
          require(c.variances.allFinite() && (c.variances.array() >= 0.0).all(),
                  "variances must be finite and nonnegative");
        } else if constexpr (std::is_same_v<T, FullCovariance>) {
          require(static_cast<std::size_t>(c.matrix.rows()) == n &&
                      static_cast<std::size_t>(c.matrix.cols()) == n,
                  "full covariance must be n x n");
          require(c.matrix.allFinite(), "covariance entries must be finite");
          require(c.matrix == c.matrix.transpose(), "full covariance must be symmetric");
        } else {
          require(c.upper.size() == n * (n + 1) / 2,
                  "expression covariance needs n(n+1)/2 upper-triangle entries");
          for (const Expr& e : c.upper) {
            require(required_dimension(e) <= n, "covariance expression uses an unknown coordinate");
          }
        }
      },
      covariance_);
  if (law_) check_law(*law_, n);
}

Expr ErrorStructure::parse(std::string_view text) const { return errstruct::parse(text, names_); }

void validate(const Frame& f) {
  const Eigen::Index m = f.point.size();
  if (m == 0 || static_cast<std::size_t>(m) > kMaxDimension) {
    throw DimensionMismatch("frame dimension must be in [1, 64]");
  }
  if (f.gamma.rows() != m || f.gamma.cols() != m || f.bias.size() != m) {
    throw DimensionMismatch("frame gamma and bias must match the point dimension");
  }
  if (!f.point.allFinite() || !f.gamma.allFinite() || !f.bias.allFinite()) {
    throw DomainError("frame has non-finite entries");
  }
  if (f.gamma != f.gamma.transpose()) throw PreconditionError("frame gamma must be symmetric");
  (void)project_psd(f.gamma, "frame gamma");
}

std::uint64_t fingerprint(const Frame& f) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](double x) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  };
  mix(static_cast<double>(f.point.size()));
  for (Eigen::Index i = 0; i < f.point.size(); ++i) mix(f.point(i));
  for (Eigen::Index i = 0; i < f.gamma.size(); ++i) mix(f.gamma.data()[i]);
  for (Eigen::Index i = 0; i < f.bias.size(); ++i) mix(f.bias(i));
  return h;
}

CovarianceAt sigma_at_detailed(const ErrorStructure& s, const Vector& point) {
  const auto n = static_cast<Eigen::Index>(s.dimension());
  if (point.size() != n) throw DimensionMismatch("point length must equal the structure dimension");
  Matrix raw = Matrix::Zero(n, n);
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DiagonalCovariance>) {
          raw.diagonal() = c.variances;
        } else if constexpr (std::is_same_v<T, FullCovariance>) {
          raw = c.matrix;
        } else {
          std::size_t k = 0;
          for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i; j < n; ++j) raw(i, j) = evaluate(c.upper[k++], point);
          }
        }
      },
      s.covariance());
  auto projected = project_psd(raw, "covariance");
  return {std::move(projected.matrix), projected.min_eigenvalue, projected.clipped};
}

Matrix sigma_at(const ErrorStructure& s, const Vector& point) {
  return sigma_at_detailed(s, point).matrix;
}

Frame base_frame(const ErrorStructure& s, const Vector& point) {
  Frame f{point, sigma_at(s, point), Vector::Zero(point.size())};
  if (!point.allFinite()) throw DomainError("base point has non-finite entries");
  return f;
}

Matrix sample_base(const ErrorStructure& s, std::size_t count, std::uint64_t seed,
                   unsigned workers) {
  if (!s.law()) throw UnsupportedSampling("structure has no base law");
  const BaseLaw& law = *s.law();
  if (std::holds_alternative<Grid1d>(law)) {
    throw UnsupportedSampling("grid law is a quadrature rule; use the quadrature path");
  }
  const auto n = static_cast<Eigen::Index>(s.dimension());
  Matrix out(n, static_cast<Eigen::Index>(count));
  for_each_chunk(chunk_count(count), workers, [&](std::size_t chunk) {
    CounterStream rng(seed, chunk, Purpose::BaseSample);
    const std::size_t begin = chunk * kChunkSize;
    const std::size_t end = std::min(count, begin + kChunkSize);
    for (std::size_t j = begin; j < end; ++j) {
      auto col = out.col(static_cast<Eigen::Index>(j));
      if (const auto* box = std::get_if<UniformBox>(&law)) {
        for (Eigen::Index i = 0; i < n; ++i) {
          col(i) = box->lower(i) + (box->upper(i) - box->lower(i)) * rng.uniform();
        }
      } else {
        const auto& g = std::get<IndependentGaussians>(law);
        for (Eigen::Index i = 0; i < n; ++i) col(i) = g.mean(i) + g.sd(i) * rng.normal();
      }
    }
  });
  return out;
}

}  // namespace errstruct
