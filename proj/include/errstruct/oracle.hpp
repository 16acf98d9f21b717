#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "errstruct/error_structure.hpp"
#include "errstruct/expression.hpp"

namespace errstruct {

struct OracleEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  // Perturbation scale; 0 for energy estimates.
  double epsilon = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr double kDefaultGammaEpsilon = 1e-3;
inline constexpr double kDefaultBiasEpsilon = 1e-2;
inline constexpr std::size_t kMinOracleSamples = 1000;

// Monte Carlo estimate of Gamma[F](point): the sample variance of
// F(point + eps*zeta) over eps^2, where zeta ~ N(0, sigma(point)). The
// standard error uses the normal-theory Var(s^2) = 2 s^4 / (n - 1).
OracleEstimate mc_gamma(const Expr& e, const ErrorStructure& s, const Vector& point,
                        double epsilon, std::size_t samples, std::uint64_t seed,
                        unsigned workers = 1);

// Monte Carlo estimate of LF(point): (mean F(point + eps*zeta) - F(point)) / eps^2.
OracleEstimate mc_bias(const Expr& e, const ErrorStructure& s, const Vector& point,
                       double epsilon, std::size_t samples, std::uint64_t seed,
                       unsigned workers = 1);

// E[Gamma[F]] under the base law. Grid laws use their own midpoint grid (and
// ignore `samples`) and report std_error 0; other laws use `samples` draws.
OracleEstimate dirichlet_energy(const Expr& e, const ErrorStructure& s, std::size_t samples,
                                std::uint64_t seed, unsigned workers = 1);

// Cauchy test thresholds.
inline constexpr double kCauchyRatio = 0.9;
inline constexpr double kNegligibleIncrement = 1e-10;

struct LimitReport {
  bool is_cauchy_in_D = false;
  // ||F_{N+1} - F_N||_{L2} and E[F_{N+1} - F_N] for N = 1..K-1.
  std::vector<double> l2_increments;
  std::vector<double> energy_increments;
  // E[F_K], reported only for Cauchy sequences.
  std::optional<double> limiting_energy;

  // Decision data. The Dirichlet norm is ||.||_D = (||.||_L2^2 + E[.])^(1/2).
  // tail_blocks = (||F_b - F_a||_D, ||F_K - F_b||_D) with a = K/4, b = K/2.
  double block_previous = 0.0;
  double block_last = 0.0;
  double block_ratio = 0.0;
  // exp(slope) of log ||F_{N+1} - F_N||_D against N over the last max(3, K/2)
  // increments; informational.
  double increment_fit_ratio = 0.0;
  bool all_increments_negligible = false;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

// Finite-stage evidence that F_1..F_K converges in the Dirichlet norm. The
// sequence is declared Cauchy when every increment is negligible or the tail
// block ratio is at most kCauchyRatio.
LimitReport extend_by_limit(std::span<const Expr> sequence, const ErrorStructure& s,
                            std::size_t samples, std::uint64_t seed, unsigned workers = 1);

}  // namespace errstruct
