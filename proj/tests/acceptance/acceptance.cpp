// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "errstruct/cli.hpp"
#include "errstruct/oracle.hpp"
#include "errstruct/propagation.hpp"
#include "errstruct/sequence_lab.hpp"
#include "errstruct/summation.hpp"
#include "support/generators.hpp"

using namespace errstruct;
namespace gen = errstruct::testing;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Vector pt(std::initializer_list<double> v) {
  Vector p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p(i++) = x;
  return p;
}

// max |a - b| relative to the size of b.
double rel_err(const Matrix& a, const Matrix& b) {
  const double scale = b.cwiseAbs().maxCoeff();
  const double diff = (a - b).cwiseAbs().maxCoeff();
  return scale > 0 ? diff / scale : diff;
}

Verdict c1_engine_vs_oracle() {
  const std::vector<std::string> n{"x", "y"};
  const ErrorStructure s(n, DiagonalCovariance{pt({0.01, 0.04})});
  const Expr e = s.parse("x * y");
  const Frame f = base_frame(s, pt({2, 3}));
  const Quantity q = propagate(e, f);
  const double g = gamma(q, q, f);
  const OracleEstimate o = mc_gamma(e, s, pt({2, 3}), 1e-3, 1000000, 20260101);
  const double rel = std::abs(o.estimate - 0.25) / 0.25;
  return {g == 0.25 && rel < 0.02,
          "engine Gamma = " + fmt("%.17g", g) + ", mc_gamma = " + fmt("%.6f", o.estimate) + " (" +
              fmt("%.3f", 100 * rel) + "% off, limit 2%)"};
}

Verdict c2_carre_identity() {
  gen::Rng rng(2);
  double worst = 0.0;
  const int cases = 250;
  for (int i = 0; i < cases; ++i) {
    const std::size_t dim = 1 + gen::pick(rng, 3);
    const Expr e = gen::random_polynomial(rng, dim);
    const ErrorStructure s(gen::names(dim), FullCovariance{gen::random_psd(rng, dim)});
    const Frame f = base_frame(s, gen::random_point(rng, dim, 2.0));
    const Quantity q = propagate(e, f);
    worst = std::max(worst, std::abs(verify_carre_identity(e, f)) / (1 + std::abs(gamma(q, q, f))));
  }
  return {worst < 1e-9, std::to_string(cases) + " polynomials, max |residual|/(1+|Gamma|) = " + fmt("%.2e", worst)};
}

Verdict c3_coherence() {
  const std::vector<std::string> n{"x", "y"};
  const ErrorStructure s(n, DiagonalCovariance{pt({1, 1})});
  const std::vector<Expr> shear{s.parse("x + y"), s.parse("y")};
  const std::vector<Expr> inverse{s.parse("x - y"), s.parse("y")};
  const Frame f = base_frame(s, pt({0, 0}));
  const Frame back = pushforward(inverse, pushforward(shear, f).frame).frame;
  const double dev = (back.gamma - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff();
  const std::vector<std::vector<Expr>> stages{shear, inverse};
  const double naive = propagate_naive(stages, s, pt({0, 0})).errors()(0);
  return {dev <= 1e-12 && naive == 3.0,
          "coherent round trip deviation " + fmt("%.1e", dev) + ", naive first-coordinate error " + fmt("%.17g", naive)};
}

Verdict c4_transport_composition() {
  gen::Rng rng(4);
  double worst = 0.0;
  const int pairs = 150;
  for (int i = 0; i < pairs; ++i) {
    const std::size_t dim = 1 + gen::pick(rng, 3);
    const Frame f = gen::random_frame(rng, dim, true, true);
    const std::vector<Expr> u = gen::random_injective(rng, dim);
    const std::vector<Expr> v = gen::random_injective(rng, dim);
    std::vector<Expr> vu;
    for (const Expr& c : v) vu.push_back(substitute(c, u));
    const Frame staged = pushforward(v, pushforward(u, f).frame).frame;
    const Frame direct = pushforward(vu, f).frame;
    worst = std::max({worst, rel_err(staged.point, direct.point), rel_err(staged.gamma, direct.gamma),
                      rel_err(staged.bias, direct.bias)});
  }
  return {worst <= 1e-9, std::to_string(pairs) + " injective pairs, max relative error " + fmt("%.2e", worst)};
}

Verdict c5_functional_calculus() {
  gen::Rng rng(5);
  double worst_fc = 0.0, worst_bilinear = 0.0, worst_cs = 0.0;
  const int cases = 200;
  for (int i = 0; i < cases; ++i) {
    const std::size_t n = 1 + gen::pick(rng, 3);
    const std::size_t m = 1 + gen::pick(rng, 3);
    const auto vars = gen::variables(n);
    const auto inner = gen::variables(m);
    const Frame f = gen::random_frame(rng, n, false, true);
    std::vector<Expr> u, v;
    for (std::size_t k = 0; k < m; ++k) {
      u.push_back(gen::random_smooth(rng, vars, 3));
      v.push_back(gen::random_smooth(rng, vars, 3));
    }
    const Expr F = gen::random_smooth(rng, inner, 3);
    const Expr G = gen::random_smooth(rng, inner, 3);
    const Quantity x = propagate(substitute(F, u), f);
    const Quantity y = propagate(substitute(G, v), f);
    const double lhs = gamma(x, y, f);

    Vector uv(static_cast<Eigen::Index>(m)), vv(static_cast<Eigen::Index>(m));
    std::vector<Quantity> uq, vq;
    for (std::size_t k = 0; k < m; ++k) {
      uq.push_back(propagate(u[k], f));
      vq.push_back(propagate(v[k], f));
      uv(static_cast<Eigen::Index>(k)) = uq.back().value;
      vv(static_cast<Eigen::Index>(k)) = vq.back().value;
    }
    const Vector dF = eval1(F, uv).gradient, dG = eval1(G, vv).gradient;
    CompensatedSum rhs;
    double abs_terms = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        const double t = dF(static_cast<Eigen::Index>(a)) * dG(static_cast<Eigen::Index>(b)) * gamma(uq[a], vq[b], f);
        rhs.add(t);
        abs_terms += std::abs(t);
      }
    }
    const double gx = gamma(x, x, f), gy = gamma(y, y, f);
    const double scale = std::max({std::abs(rhs.value()), std::sqrt(gx * gy), abs_terms});
    if (scale > 0) worst_fc = std::max(worst_fc, std::abs(lhs - rhs.value()) / scale);

    worst_cs = std::max(worst_cs, lhs * lhs - gx * gy * (1 + 1e-10));
    const double a = gen::uniform(rng, -2, 2), b = gen::uniform(rng, -2, 2);
    const double bl = gamma(a * x + b * uq[0], y, f);
    const double br = a * lhs + b * gamma(uq[0], y, f);
    const double bscale = std::abs(a) * std::sqrt(gx * gy) + std::abs(b) * std::sqrt(gamma(uq[0], uq[0], f) * gy);
    if (bscale > 0) worst_bilinear = std::max(worst_bilinear, std::abs(bl - br) / bscale);
  }
  return {worst_fc <= 1e-9 && worst_cs <= 0.0 && worst_bilinear <= 1e-12,
          std::to_string(cases) + " cases, functional calculus rel " + fmt("%.2e", worst_fc) + ", bilinearity rel " +
              fmt("%.2e", worst_bilinear) + ", Cauchy-Schwarz " + (worst_cs <= 0.0 ? "holds" : "violated")};
}

Verdict c6_extension_tool() {
  const Json structure = {{"vars", {"x"}},
                          {"sigma", {{"kind", "diag"}, {"values", {1}}}},
                          {"law", {{"kind", "grid"}, {"interval", {0, 1}}, {"points", 10000}}}};
  auto family = [&](const char* term) {
    return Json{{"command", "limit"},
                {"structure", structure},
                {"sequence",
                 {{"family",
                   {{"term", term}, {"index", "k"}, {"K", 200}, {"constants", {{"pi", std::numbers::pi}}}}}}},
                {"samples", 0},
                {"seed", 0},
                {"workers", 1}};
  };
  const Json good = cli::execute(family("sin(k*pi*x)/k^2")).results;
  const Json bad = cli::execute(family("sin(k*pi*x)/k")).results;
  const double target = std::pow(std::numbers::pi, 4) / 12;
  const double energy = good["limiting_energy"].is_number() ? good["limiting_energy"].get<double>() : NAN;
  const double rel = std::abs(energy - target) / target;
  const bool pass = good["is_cauchy_in_D"].get<bool>() && rel < 0.01 && !bad["is_cauchy_in_D"].get<bool>();
  return {pass, "1/k^2: Cauchy=" + std::string(good["is_cauchy_in_D"].get<bool>() ? "true" : "false") +
                    ", E[F_200] = " + fmt("%.6f", energy) + " (" + fmt("%.2f", 100 * rel) + "% from pi^4/12); 1/k: Cauchy=" +
                    (bad["is_cauchy_in_D"].get<bool>() ? "true" : "false") + " (block ratio " +
                    fmt("%.3f", bad["decision"]["block_ratio"].get<double>()) + ")"};
}

Verdict c7_champernowne() {
  const std::string prefix = to_ascii_bits(champernowne_bits(17));
  const BitSequence s = champernowne_bits(1000000);
  const NormalityReport r = normality_report(s, 3);
  const double f1 = std::abs(block_frequencies(s, 1)[1] - 0.5);
  const double d3 = r.rows[2].max_deviation;
  return {prefix == "01101110010111011" && f1 < 0.05 && d3 < 0.03,
          "prefix " + prefix + ", |freq(1) - 0.5| = " + fmt("%.6f", f1) + ", max 3-block deviation = " + fmt("%.6f", d3)};
}

Verdict c8_martingale() {
  gen::Rng rng(8);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const BettingStrategy st = gen::random_strategy(rng);
    for (std::size_t len = 1; len <= 12; ++len) {
      CompensatedSum total;
      for (std::uint64_t v = 0; v < (1ull << len); ++v) total.add(martingale_capital(gen::bits_of(v, len), st, 1.0).back());
      worst = std::max(worst, std::abs(total.value() / static_cast<double>(1ull << len) - 1.0));
    }
  }
  // Two-state strategy: bet 2% of capital that the previous bit repeats.
  const BettingStrategy follow({{0, 1}, {0, 1}}, {Bet{0.02, 0}, Bet{0.02, 1}}, 0, "follow-previous");
  const EnsembleResult e = martingale_ensemble(follow, 1.0, 10000, 1000, 8, 4);
  const double z = std::abs(e.mean_final - 1.0) / e.std_error;
  return {worst <= 1e-12 && z <= 3.0,
          "exhaustive max |mean - 1| = " + fmt("%.1e", worst) + "; ensemble mean " + fmt("%.6f", e.mean_final) + " = 1 " +
              (e.mean_final >= 1 ? "+ " : "- ") + fmt("%.2f", z) + " std errors"};
}

Verdict c9_selection() {
  gen::Rng rng(9);
  const BitSequence s = prng_bits(1000000, 9);
  int checked = 0;
  bool pass = true;
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const BitSequence sub = select_subsequence(s, gen::random_rule(rng));
    if (sub.size() < 10000) continue;
    std::size_t ones = 0;
    for (auto b : sub.bits) ones += b;
    const double m = static_cast<double>(sub.size());
    const double dev = std::abs(static_cast<double>(ones) / m - 0.5);
    const double bound = 4.0 / (2.0 * std::sqrt(m));
    worst = std::max(worst, dev / bound);
    ++checked;
    if (dev > bound) pass = false;
  }
  return {pass, std::to_string(checked) + " of 10 rules selected >= 10^4 bits; worst deviation " + fmt("%.3f", worst) +
                    " of the CLT bound"};
}

Verdict c10_reproducibility() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "errstruct_acceptance";
  fs::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream((dir / name).string()) << text;
    return (dir / name).string();
  };
  const std::string uni = write("u.json", R"({"vars": ["x"], "sigma": {"kind": "diag", "values": [1]},
                                              "law": {"kind": "uniform", "box": [[0, 1]]}})");
  const std::string fam = write("f.json", R"({"family": {"term": "sin(k*pi*x)/k^2", "index": "k", "K": 24,
                                              "constants": {"pi": 3.141592653589793}}})");
  const std::string rule = write("r.json", R"({"states": 2, "transitions": [[0, 1], [0, 1]], "decisions": ["skip", "select"]})");
  const std::string strat = write("s.json", R"({"states": 2, "transitions": [[0, 1], [0, 1]],
                                                "decisions": [{"stake": 0.3, "predict": 0}, {"stake": 0.1, "predict": 1}]})");
  const std::string seqfile = (dir / "g.txt").string();
  const std::vector<std::vector<std::string>> commands{
      {"propagate", "--expr", "x*y + sin(x)", "--point", "2,3", "--sigma", "diag:0.01,0.04", "--vars", "x,y"},
      {"oracle", "--expr", "x*y", "--point", "2,3", "--sigma", "diag:0.01,0.04", "--vars", "x,y", "--samples", "100000",
       "--seed", "77", "--workers", "1"},
      {"coherence"},
      {"limit", "--spec", fam, "--structure", uni, "--samples", "30000", "--seed", "5", "--workers", "2"},
      {"sequence", "generate", "--generator", "prng", "--count", "20000", "--seed", "3", "--file", seqfile},
      {"sequence", "analyze", "--input", seqfile, "--kmax", "6"},
      {"sequence", "select", "--generator", "champernowne", "--count", "50000", "--rule", rule},
      {"sequence", "bet", "--input", seqfile, "--strategy", strat},
      {"sequence", "bet", "--strategy", strat, "--ensemble", "10000", "--length", "100", "--seed", "6", "--workers", "1"},
  };
  int identical = 0;
  std::string failures;
  for (const auto& c : commands) {
    std::vector<std::string> args{"errstruct"};
    args.insert(args.end(), c.begin(), c.end());
    const std::string report = (dir / "report.json").string();
    args.insert(args.end(), {"--out", report});
    std::ostringstream out, err;
    if (cli::run(args, out, err) != 0) {
      failures += " " + c[0] + "(run: " + err.str() + ")";
      continue;
    }
    std::ostringstream out2, err2;
    if (cli::run({"errstruct", "rerun", report, "--workers", "4"}, out2, err2) != 0) {
      failures += " " + c[0] + "(rerun: " + err2.str() + ")";
      continue;
    }
    const Json r = Json::parse(out2.str());
    if (r["rerun"]["identical"].get<bool>()) {
      ++identical;
    } else {
      failures += " " + c[0];
    }
  }
  fs::remove_all(dir);
  return {identical == static_cast<int>(commands.size()),
          std::to_string(identical) + "/" + std::to_string(commands.size()) +
              " commands reproduced bit-exactly from their echoed configuration (re-run with 4 workers where "
              "applicable)" + (failures.empty() ? "" : "; failed:" + failures)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double limit_seconds;  // 0: no runtime bound
    std::function<Verdict()> run;
  };
  const Criterion criteria[] = {
      {"1 engine vs oracle (Gauss product)", 10, c1_engine_vs_oracle},
      {"2 carre du champ identity", 5, c2_carre_identity},
      {"3 coherence demo", 1, c3_coherence},
      {"4 transport composition", 10, c4_transport_composition},
      {"5 functional calculus", 0, c5_functional_calculus},
      {"6 extension tool", 30, c6_extension_tool},
      {"7 Champernowne", 0, c7_champernowne},
      {"8 martingale property", 60, c8_martingale},
      {"9 selection rules", 0, c9_selection},
      {"10 reproducibility", 0, c10_reproducibility},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt("%.2f s", secs);
    if (c.limit_seconds > 0) {
      timing += fmt(" (limit %.0f s)", c.limit_seconds);
      if (secs >= c.limit_seconds) {
        v.pass = false;
        v.detail += "; too slow";
      }
    }
    if (!v.pass) ++failed;
    std::printf("%s criterion %s: %s [%s]\n", v.pass ? "PASS" : "FAIL", c.name, v.detail.c_str(), timing.c_str());
  }
  std::printf("%d/10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
