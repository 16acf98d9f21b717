#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "errstruct/oracle.hpp"
#include "errstruct/propagation.hpp"
#include "support/generators.hpp"

using namespace errstruct;
namespace gen = errstruct::testing;

namespace {

Vector pt(std::initializer_list<double> v) {
  Vector p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p(i++) = x;
  return p;
}

const std::vector<std::string> kX{"x"};
const std::vector<std::string> kXY{"x", "y"};

ErrorStructure unit_interval(std::optional<BaseLaw> law) {
  return ErrorStructure(kX, DiagonalCovariance{pt({1})}, std::move(law));
}

std::vector<Expr> sine_family(int k_max, double power) {
  std::vector<Expr> out;
  const Expr x = Expr::variable(0, "x");
  for (int k = 1; k <= k_max; ++k) {
    const Expr t = sin(Expr::constant(k * std::numbers::pi) * x) / Expr::constant(std::pow(k, power));
    out.push_back(k == 1 ? t : out.back() + t);
  }
  return out;
}

}  // namespace

TEST(McGamma, LinearIsExactInExpectation) {
  const ErrorStructure s(kXY, DiagonalCovariance{pt({1, 1})});
  const OracleEstimate e = mc_gamma(parse("x + y", kXY), s, pt({0.2, 0.7}), 0.05, 20000, 1);
  EXPECT_LE(std::abs(e.estimate - 2.0), 3 * e.std_error);
  EXPECT_EQ(e.samples, 20000u);
  EXPECT_EQ(e.seed, 1u);
}

TEST(McGamma, CorrelatedProduct) {
  Matrix m(2, 2);
  m << 0.01, 0.01, 0.01, 0.04;
  const ErrorStructure s(kXY, FullCovariance{m});
  const Expr e = parse("x * y", kXY);
  const Frame f = base_frame(s, pt({2, 3}));
  const Quantity q = propagate(e, f);
  const double engine = gamma(q, q, f);
  EXPECT_DOUBLE_EQ(engine, 9 * 0.01 + 4 * 0.04 + 2 * 6 * 0.01);
  const OracleEstimate o = mc_gamma(e, s, pt({2, 3}), 1e-3, 200000, 3);
  EXPECT_LE(std::abs(o.estimate - engine), 3 * o.std_error);
}

TEST(McGamma, Preconditions) {
  const ErrorStructure s(kX, DiagonalCovariance{pt({1})});
  const Expr e = parse("x", kX);
  EXPECT_THROW(mc_gamma(e, s, pt({0}), 1e-3, 1, 0), PreconditionError);
  EXPECT_THROW(mc_gamma(e, s, pt({0}), 0.0, 1000, 0), PreconditionError);
  EXPECT_THROW(mc_gamma(e, s, pt({0}), 0.2, 1000, 0), PreconditionError);
  EXPECT_THROW(mc_gamma(e, s, pt({0, 1}), 1e-3, 1000, 0), DimensionMismatch);
}

TEST(McGamma, DomainErrorNamesTheSample) {
  const ErrorStructure s(kX, DiagonalCovariance{pt({1})});
  try {
    mc_gamma(parse("log(x)", kX), s, pt({0.001}), 0.1, 1000, 0);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("sample"), std::string::npos);
  }
}

TEST(McBias, QuadraticCubicAndLinear) {
  const ErrorStructure s(kX, DiagonalCovariance{pt({1})});
  const OracleEstimate sq = mc_bias(parse("x^2", kX), s, pt({0.4}), 1e-2, 200000, 2);
  EXPECT_LE(std::abs(sq.estimate - 1.0), 3 * sq.std_error);
  const OracleEstimate cube = mc_bias(parse("x^3", kX), s, pt({1}), 1e-2, 1000000, 2, 4);
  EXPECT_LE(std::abs(cube.estimate - 3.0), 3 * cube.std_error);
  const OracleEstimate lin = mc_bias(parse("2*x + 1", kX), s, pt({1}), 1e-2, 10000, 2);
  EXPECT_LE(std::abs(lin.estimate), 3 * lin.std_error + 1e-9);
}

TEST(Oracle, WorkerCountDoesNotChangeResults) {
  const ErrorStructure s(kXY, DiagonalCovariance{pt({0.01, 0.04})});
  const Expr e = parse("x * sin(y)", kXY);
  for (unsigned w : {2u, 3u, 8u}) {
    const OracleEstimate a = mc_gamma(e, s, pt({2, 3}), 1e-3, 50000, 9, 1);
    const OracleEstimate b = mc_gamma(e, s, pt({2, 3}), 1e-3, 50000, 9, w);
    EXPECT_EQ(a.estimate, b.estimate);
    EXPECT_EQ(a.std_error, b.std_error);
    EXPECT_EQ(mc_bias(e, s, pt({2, 3}), 1e-2, 50000, 9, 1).estimate,
              mc_bias(e, s, pt({2, 3}), 1e-2, 50000, 9, w).estimate);
  }
}

// Engine/oracle agreement on random smooth expressions with
// |estimate - engine| <= 3 se + C eps |engine|, C = 10.
TEST(Oracle, AgreesWithEngineOnRandomSuite) {
  gen::Rng rng(77);
  int disagreements = 0;
  const int trials = 40;
  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t n = 1 + gen::pick(rng, 3);
    const auto vars = gen::variables(n);
    const Expr e = gen::random_smooth(rng, vars, 3);
    const ErrorStructure s(gen::names(n), FullCovariance{gen::random_psd(rng, n)});
    const Vector p = gen::random_point(rng, n);
    const Quantity q = propagate(e, base_frame(s, p));
    const double g = gamma(q, q, base_frame(s, p));
    const OracleEstimate og = mc_gamma(e, s, p, 1e-3, 20000, trial);
    const OracleEstimate ob = mc_bias(e, s, p, 1e-2, 20000, trial);
    if (std::abs(og.estimate - g) > 3 * og.std_error + 10 * 1e-3 * std::abs(g) + 1e-12) ++disagreements;
    if (std::abs(ob.estimate - q.bias) > 3 * ob.std_error + 10 * 1e-2 * std::abs(q.bias) + 1e-12) ++disagreements;
  }
  // Each check fails with probability about 0.3% by chance alone.
  EXPECT_LE(disagreements, 2);
}

TEST(Energy, UniformLinearAndSquare) {
  const auto mc = unit_interval(UniformBox{pt({0}), pt({1})});
  const OracleEstimate lin = dirichlet_energy(parse("x", kX), mc, 1000, 0);
  EXPECT_EQ(lin.estimate, 1.0);
  EXPECT_EQ(lin.epsilon, 0.0);
  const OracleEstimate sq = dirichlet_energy(parse("x^2", kX), mc, 100000, 5);
  EXPECT_LE(std::abs(sq.estimate - 4.0 / 3.0), 3 * sq.std_error);
  const auto grid = unit_interval(Grid1d{0, 1, 1000});
  const OracleEstimate gq = dirichlet_energy(parse("x^2", kX), grid, 0, 0);
  EXPECT_NEAR(gq.estimate, 4.0 / 3.0, 1e-6);
  EXPECT_EQ(gq.std_error, 0.0);
}

TEST(Energy, GridConvergesQuadratically) {
  const Expr e = parse("exp(x) * sin(3*x)", kX);
  // Exact integral of (d/dx e^x sin 3x)^2 over [0, 1] by fine quadrature.
  const double exact = dirichlet_energy(e, unit_interval(Grid1d{0, 1, 1 << 18}), 0, 0).estimate;
  const double e1 = dirichlet_energy(e, unit_interval(Grid1d{0, 1, 64}), 0, 0).estimate - exact;
  const double e2 = dirichlet_energy(e, unit_interval(Grid1d{0, 1, 128}), 0, 0).estimate - exact;
  EXPECT_NEAR(e1 / e2, 4.0, 0.1);
}

TEST(Energy, SingularEndpoint) {
  const Expr e = parse("sqrt(x)", kX);
  EXPECT_TRUE(std::isfinite(dirichlet_energy(e, unit_interval(Grid1d{0, 1, 100}), 0, 0).estimate));
  try {
    dirichlet_energy(e, unit_interval(UniformBox{pt({-1}), pt({1})}), 1000, 0);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("point"), std::string::npos);
  }
  EXPECT_THROW(dirichlet_energy(e, unit_interval(std::nullopt), 1000, 0), PreconditionError);
}

TEST(Limit, InverseSquareSineFamilyIsCauchy) {
  const auto s = unit_interval(Grid1d{0, 1, 10000});
  const LimitReport r = extend_by_limit(sine_family(200, 2), s, 0, 0);
  EXPECT_TRUE(r.is_cauchy_in_D);
  ASSERT_TRUE(r.limiting_energy.has_value());
  const double target = std::pow(std::numbers::pi, 4) / 12;
  EXPECT_LT(std::abs(*r.limiting_energy - target) / target, 0.01);
  EXPECT_EQ(r.l2_increments.size(), 199u);
  EXPECT_EQ(r.energy_increments.size(), 199u);
}

TEST(Limit, InverseSineFamilyIsNotCauchy) {
  const auto s = unit_interval(Grid1d{0, 1, 10000});
  const LimitReport r = extend_by_limit(sine_family(200, 1), s, 0, 0);
  EXPECT_FALSE(r.is_cauchy_in_D);
  EXPECT_FALSE(r.limiting_energy.has_value());
  // Each energy increment is pi^2/2 while the L2 increments shrink like 1/k.
  EXPECT_NEAR(r.energy_increments.back(), std::numbers::pi * std::numbers::pi / 2, 1e-6);
  EXPECT_LT(r.l2_increments.back(), 0.01);
}

TEST(Limit, ConstantSequenceAndPreconditions) {
  const auto s = unit_interval(UniformBox{pt({0}), pt({1})});
  const Expr f = parse("sin(x) + x^2", kX);
  const std::vector<Expr> same(5, f);
  const LimitReport r = extend_by_limit(same, s, 5000, 1);
  EXPECT_TRUE(r.is_cauchy_in_D);
  EXPECT_TRUE(r.all_increments_negligible);
  EXPECT_EQ(*r.limiting_energy, dirichlet_energy(f, s, 5000, 1).estimate);
  EXPECT_THROW(extend_by_limit(std::vector<Expr>(3, f), s, 5000, 1), PreconditionError);
}

TEST(Limit, AppendingConvergentTermsKeepsCauchy) {
  const auto s = unit_interval(Grid1d{0, 1, 2000});
  for (int k : {40, 80, 160}) {
    EXPECT_TRUE(extend_by_limit(sine_family(k, 2), s, 0, 0).is_cauchy_in_D) << k;
  }
}

TEST(Limit, WorkerCountDoesNotChangeResults) {
  const auto s = unit_interval(UniformBox{pt({0}), pt({1})});
  const auto fam = sine_family(16, 2);
  const LimitReport a = extend_by_limit(fam, s, 20000, 4, 1);
  const LimitReport b = extend_by_limit(fam, s, 20000, 4, 5);
  EXPECT_EQ(a.l2_increments, b.l2_increments);
  EXPECT_EQ(a.energy_increments, b.energy_increments);
  EXPECT_EQ(a.limiting_energy, b.limiting_energy);
}
