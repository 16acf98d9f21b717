#include "errstruct/oracle.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "errstruct/psd.hpp"
#include "errstruct/random.hpp"
#include "errstruct/summation.hpp"

namespace errstruct {

namespace {

std::string describe(const Vector& p) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (Eigen::Index i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p(i);
  os << ')';
  return os.str();
}

void check_fits(const Tape& tape, const ErrorStructure& s) {
  if (tape.required_dimension() > s.dimension()) {
    throw DimensionMismatch("expression uses more coordinates than the structure has");
  }
}

struct Moments {
  double mean;
  double variance;
  std::size_t n;
};

// Sample moments of d = F(point + eps*zeta) - F(point).
Moments perturbation_moments(const Expr& e, const ErrorStructure& s, const Vector& point,
                             double epsilon, std::size_t samples, std::uint64_t seed,
                             unsigned workers) {
  if (!(epsilon > 0.0 && epsilon <= 0.1)) throw PreconditionError("epsilon must lie in (0, 0.1]");
  if (samples < kMinOracleSamples) {
    throw PreconditionError("oracle needs at least " + std::to_string(kMinOracleSamples) +
                            " samples");
  }
  Tape tape(e);
  check_fits(tape, s);
  const Matrix root = psd_sqrt(sigma_at(s, point));
  const auto n = point.size();

  Tape::Workspace ws0;
  tape.evaluate_values(point.data(), ws0);
  const double f0 = tape.value(0, ws0);

  const std::size_t chunks = chunk_count(samples);
  std::vector<CompensatedSum> sums(chunks), squares(chunks);
  for_each_chunk(chunks, workers, [&](std::size_t c) {
    CounterStream rng(seed, c, Purpose::Perturbation);
    Tape::Workspace ws;
    Vector z(n);
    Vector x(n);
    const std::size_t begin = c * kChunkSize;
    const std::size_t end = std::min(samples, begin + kChunkSize);
    for (std::size_t j = begin; j < end; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
      x.noalias() = point + epsilon * (root * z);
      try {
        tape.evaluate_values(x.data(), ws);
      } catch (const DomainError& err) {
        throw DomainError(std::string(err.what()) + " at perturbed sample " + std::to_string(j) +
                          " " + describe(x));
      }
      const double d = tape.value(0, ws) - f0;
      sums[c].add(d);
      squares[c].add(d * d);
    }
  });
  CompensatedSum s1, s2;
  for (std::size_t c = 0; c < chunks; ++c) {
    s1.add(sums[c]);
    s2.add(squares[c]);
  }
  const double count = static_cast<double>(samples);
  const double mean = s1.value() / count;
  const double variance = std::max(0.0, (s2.value() - s1.value() * mean) / (count - 1.0));
  return {mean, variance, samples};
}

// Points and weights of the base law: the midpoint grid, or `samples` draws.
struct LawPoints {
  Matrix points;
  bool deterministic;
};

LawPoints law_points(const ErrorStructure& s, std::size_t samples, std::uint64_t seed,
                     unsigned workers) {
  if (!s.law()) throw PreconditionError("structure has no base law");
  if (const auto* grid = std::get_if<Grid1d>(&*s.law())) {
    Matrix p(1, static_cast<Eigen::Index>(grid->points));
    const double h = (grid->upper - grid->lower) / static_cast<double>(grid->points);
    for (std::size_t i = 0; i < grid->points; ++i) {
      p(0, static_cast<Eigen::Index>(i)) = grid->lower + (static_cast<double>(i) + 0.5) * h;
    }
    return {std::move(p), true};
  }
  if (samples < 2) throw PreconditionError("Monte Carlo expectations need at least 2 samples");
  return {sample_base(s, samples, seed, workers), false};
}

bool constant_covariance(const ErrorStructure& s) {
  return !std::holds_alternative<ExpressionCovariance>(s.covariance());
}

}  // namespace

OracleEstimate mc_gamma(const Expr& e, const ErrorStructure& s, const Vector& point,
                        double epsilon, std::size_t samples, std::uint64_t seed,
                        unsigned workers) {
  const Moments m = perturbation_moments(e, s, point, epsilon, samples, seed, workers);
  const double eps2 = epsilon * epsilon;
  const double estimate = m.variance / eps2;
  const double se = std::sqrt(2.0 / (static_cast<double>(m.n) - 1.0)) * estimate;
  return {estimate, se, m.n, epsilon, seed};
}

OracleEstimate mc_bias(const Expr& e, const ErrorStructure& s, const Vector& point,
                       double epsilon, std::size_t samples, std::uint64_t seed,
                       unsigned workers) {
  const Moments m = perturbation_moments(e, s, point, epsilon, samples, seed, workers);
  const double eps2 = epsilon * epsilon;
  const double se = std::sqrt(m.variance / static_cast<double>(m.n)) / eps2;
  return {m.mean / eps2, se, m.n, epsilon, seed};
}

OracleEstimate dirichlet_energy(const Expr& e, const ErrorStructure& s, std::size_t samples,
                                std::uint64_t seed, unsigned workers) {
  Tape tape(e);
  check_fits(tape, s);
  const LawPoints law = law_points(s, samples, seed, workers);
  const auto count = static_cast<std::size_t>(law.points.cols());
  const bool fixed_sigma = constant_covariance(s);
  const Matrix sigma0 = fixed_sigma ? sigma_at(s, law.points.col(0)) : Matrix();

  const std::size_t chunks = chunk_count(count);
  std::vector<CompensatedSum> sums(chunks), squares(chunks);
  for_each_chunk(chunks, workers, [&](std::size_t c) {
    Tape::Workspace ws;
    const std::size_t begin = c * kChunkSize;
    const std::size_t end = std::min(count, begin + kChunkSize);
    for (std::size_t j = begin; j < end; ++j) {
      const Vector p = law.points.col(static_cast<Eigen::Index>(j));
      double g;
      try {
        tape.evaluate_jets(p, 1, ws);
        const Vector& grad = tape.jet(0, ws).gradient;
        g = fixed_sigma ? grad.dot(sigma0 * grad) : grad.dot(sigma_at(s, p) * grad);
      } catch (const DomainError& err) {
        throw DomainError(std::string(err.what()) + " at base point " + describe(p));
      }
      if (!std::isfinite(g)) throw DomainError("non-finite energy density at " + describe(p));
      sums[c].add(g);
      squares[c].add(g * g);
    }
  });
  CompensatedSum s1, s2;
  for (std::size_t c = 0; c < chunks; ++c) {
    s1.add(sums[c]);
    s2.add(squares[c]);
  }
  const double n = static_cast<double>(count);
  const double mean = s1.value() / n;
  double se = 0.0;
  if (!law.deterministic) {
    const double variance = std::max(0.0, (s2.value() - s1.value() * mean) / (n - 1.0));
    se = std::sqrt(variance / n);
  }
  return {mean, se, count, 0.0, law.deterministic ? 0 : seed};
}

LimitReport extend_by_limit(std::span<const Expr> sequence, const ErrorStructure& s,
                            std::size_t samples, std::uint64_t seed, unsigned workers) {
  const std::size_t k = sequence.size();
  if (k < 4) throw PreconditionError("limit test needs at least 4 terms");
  Tape tape(sequence);
  check_fits(tape, s);
  const LawPoints law = law_points(s, samples, seed, workers);
  const auto count = static_cast<std::size_t>(law.points.cols());
  const bool fixed_sigma = constant_covariance(s);
  const Matrix sigma0 = fixed_sigma ? sigma_at(s, law.points.col(0)) : Matrix();

  // 1-based indices of the tail blocks.
  const std::size_t a = std::max<std::size_t>(1, k / 4);
  const std::size_t b = k / 2;

  // Accumulator slots: [0, k-1) squared L2 increments, [k-1, 2k-2) energy
  // increments, then the two tail blocks (l2^2, energy each) and E[F_K].
  const std::size_t slots = 2 * (k - 1) + 5;
  const std::size_t chunks = chunk_count(count);
  std::vector<std::vector<CompensatedSum>> partial(chunks);

  for_each_chunk(chunks, workers, [&](std::size_t c) {
    std::vector<CompensatedSum>& acc = partial[c];
    acc.resize(slots);
    Tape::Workspace ws;
    const std::size_t begin = c * kChunkSize;
    const std::size_t end = std::min(count, begin + kChunkSize);
    for (std::size_t j = begin; j < end; ++j) {
      const Vector p = law.points.col(static_cast<Eigen::Index>(j));
      Matrix sigma;
      try {
        tape.evaluate_jets(p, 1, ws);
        sigma = fixed_sigma ? sigma0 : sigma_at(s, p);
      } catch (const DomainError& err) {
        throw DomainError(std::string(err.what()) + " at base point " + describe(p));
      }
      auto diff = [&](std::size_t hi, std::size_t lo, std::size_t slot_l2, std::size_t slot_e) {
        const Jet<double>& x = tape.jet(hi - 1, ws);
        const Jet<double>& y = tape.jet(lo - 1, ws);
        const double dv = x.value - y.value;
        const Vector dg = x.gradient - y.gradient;
        acc[slot_l2].add(dv * dv);
        acc[slot_e].add(dg.dot(sigma * dg));
      };
      for (std::size_t n = 1; n < k; ++n) diff(n + 1, n, n - 1, k - 1 + n - 1);
      diff(b, a, 2 * (k - 1), 2 * (k - 1) + 1);
      diff(k, b, 2 * (k - 1) + 2, 2 * (k - 1) + 3);
      const Vector& gk = tape.jet(k - 1, ws).gradient;
      acc[slots - 1].add(gk.dot(sigma * gk));
    }
  });

  std::vector<CompensatedSum> total(slots);
  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t i = 0; i < slots; ++i) total[i].add(partial[c][i]);
  }
  const double n = static_cast<double>(count);
  auto mean = [&](std::size_t slot) { return total[slot].value() / n; };

  LimitReport r;
  r.samples = count;
  r.seed = law.deterministic ? 0 : seed;
  std::vector<double> dnorm(k - 1);
  r.all_increments_negligible = true;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    const double l2sq = mean(i);
    const double energy = mean(k - 1 + i);
    r.l2_increments.push_back(std::sqrt(l2sq));
    r.energy_increments.push_back(energy);
    dnorm[i] = std::sqrt(l2sq + energy);
    if (dnorm[i] >= kNegligibleIncrement) r.all_increments_negligible = false;
  }
  r.block_previous = std::sqrt(mean(2 * (k - 1)) + mean(2 * (k - 1) + 1));
  r.block_last = std::sqrt(mean(2 * (k - 1) + 2) + mean(2 * (k - 1) + 3));
  if (r.block_previous > 0.0) {
    r.block_ratio = r.block_last / r.block_previous;
  } else {
    r.block_ratio = r.block_last > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }

  // Least-squares slope of log d_N over the fitted window, skipping zeros.
  const std::size_t window = std::min(k - 1, std::max<std::size_t>(3, k / 2));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t used = 0;
  for (std::size_t i = k - 1 - window; i + 1 < k; ++i) {
    if (!(dnorm[i] > 0.0)) continue;
    const double x = static_cast<double>(i + 1);
    const double y = std::log(dnorm[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++used;
  }
  if (used >= 2) {
    const double u = static_cast<double>(used);
    r.increment_fit_ratio = std::exp((u * sxy - sx * sy) / (u * sxx - sx * sx));
  }

  r.is_cauchy_in_D = r.all_increments_negligible || r.block_ratio <= kCauchyRatio;
  if (r.is_cauchy_in_D) r.limiting_energy = mean(slots - 1);
  return r;
}

}  // namespace errstruct
