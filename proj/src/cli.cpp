#include "errstruct/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "errstruct/oracle.hpp"
#include "errstruct/propagation.hpp"
#include "errstruct/random.hpp"
#include "errstruct/sequence_lab.hpp"

namespace errstruct::cli {

namespace {

[[noreturn]] void fail(const std::string& message) { throw UsageError(message); }

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// JSON has no infinities; they are written as null.
Json real(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(real(v(i)));
  return out;
}

Json matrix_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i).transpose()));
  return out;
}

Vector vector_from(const Json& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  return out;
}

Json estimate_json(const OracleEstimate& e) {
  return {{"estimate", real(e.estimate)}, {"std_error", real(e.std_error)}, {"samples", e.samples},
          {"epsilon", e.epsilon}, {"seed", e.seed}};
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t bits_hash(const BitSequence& seq) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : seq.bits) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::size_t ones(const BitSequence& seq) {
  std::size_t n = 0;
  for (std::uint8_t b : seq.bits) n += b;
  return n;
}

Json sequence_summary(const BitSequence& seq) {
  const std::size_t shown = std::min<std::size_t>(seq.size(), 64);
  return {{"length", seq.size()},
          {"ones", ones(seq)},
          {"prefix", to_ascii_bits(seq).substr(0, shown)},
          {"fnv1a", hex(bits_hash(seq))}};
}

void add_clip_warning(Json& warnings, const CovarianceAt& sigma) {
  if (sigma.clipped > 0.0) {
    warnings.push_back("covariance clipped to positive semidefinite: min eigenvalue " +
                       num(sigma.min_eigenvalue) + " raised to 0");
  }
}

unsigned workers_of(const Json& config) {
  return config.contains("workers") ? config["workers"].get<unsigned>() : 1u;
}

// ---------------------------------------------------------------- propagate

struct Engine {
  Quantity q;
  double gamma;
  CovarianceAt sigma;
};

Engine run_engine(const Expr& e, const ErrorStructure& s, const Vector& point) {
  if (!point.allFinite()) throw DomainError("point has non-finite entries");
  CovarianceAt sigma = sigma_at_detailed(s, point);
  const Frame frame{point, sigma.matrix, Vector::Zero(point.size())};
  Quantity q = propagate(e, frame);
  const double g = gamma(q, q, frame);
  return {std::move(q), g, std::move(sigma)};
}

void add_engine_warnings(Json& warnings, const Engine& engine) {
  add_clip_warning(warnings, engine.sigma);
  if (engine.q.nondifferentiable) {
    warnings.push_back("expression is not differentiable at the point; subgradient 0 used");
  }
}

Outcome do_propagate(const Json& config) {
  const ErrorStructure s = structure_from_json(config["structure"]);
  const Expr e = s.parse(config["expr"].get<std::string>());
  const Vector point = vector_from(config["point"]);
  const Engine engine = run_engine(e, s, point);

  Outcome out;
  out.results = {{"value", real(engine.q.value)},
                 {"gradient", vector_json(engine.q.gradient)},
                 {"gamma", real(engine.gamma)},
                 {"sigma", real(std::sqrt(engine.gamma))},
                 {"bias", real(engine.q.bias)},
                 {"nondifferentiable", engine.q.nondifferentiable}};
  add_engine_warnings(out.warnings, engine);
  out.table.push_back({"variable", "value", "gradient"});
  for (std::size_t i = 0; i < s.dimension(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out.table.push_back({s.names()[i], num(point(k)), num(engine.q.gradient(k))});
  }
  return out;
}

// ------------------------------------------------------------------- oracle

Json verdict(double engine, const OracleEstimate& e) {
  const double tolerance = 3.0 * e.std_error + kAgreementConstant * e.epsilon * std::abs(engine);
  return {{"difference", real(e.estimate - engine)},
          {"tolerance", real(tolerance)},
          {"agrees", std::abs(e.estimate - engine) <= tolerance}};
}

Outcome do_oracle(const Json& config) {
  const ErrorStructure s = structure_from_json(config["structure"]);
  const Expr e = s.parse(config["expr"].get<std::string>());
  const Vector point = vector_from(config["point"]);
  const auto samples = config["samples"].get<std::size_t>();
  const auto seed = config["seed"].get<std::uint64_t>();
  const unsigned workers = workers_of(config);
  const Engine engine = run_engine(e, s, point);
  const OracleEstimate g = mc_gamma(e, s, point, config["epsilon"].get<double>(), samples, seed, workers);
  const OracleEstimate b =
      mc_bias(e, s, point, config["bias_epsilon"].get<double>(), samples, seed, workers);

  Outcome out;
  const Json gv = verdict(engine.gamma, g);
  const Json bv = verdict(engine.q.bias, b);
  out.results = {{"engine", {{"value", real(engine.q.value)}, {"gamma", real(engine.gamma)},
                             {"bias", real(engine.q.bias)}}},
                 {"mc_gamma", estimate_json(g)},
                 {"mc_bias", estimate_json(b)},
                 {"agreement", {{"constant", kAgreementConstant}, {"gamma", gv}, {"bias", bv}}}};
  add_engine_warnings(out.warnings, engine);
  if (!gv["agrees"].get<bool>()) out.warnings.push_back("mc_gamma disagrees with the engine");
  if (!bv["agrees"].get<bool>()) out.warnings.push_back("mc_bias disagrees with the engine");
  out.table = {{"quantity", "engine", "estimate", "std_error", "agrees"},
               {"gamma", num(engine.gamma), num(g.estimate), num(g.std_error),
                gv["agrees"].get<bool>() ? "true" : "false"},
               {"bias", num(engine.q.bias), num(b.estimate), num(b.std_error),
                bv["agrees"].get<bool>() ? "true" : "false"}};
  return out;
}

// ---------------------------------------------------------------- coherence

Json frame_json(const Frame& f) {
  return {{"point", vector_json(f.point)}, {"gamma", matrix_json(f.gamma)}, {"bias", vector_json(f.bias)}};
}

Outcome do_coherence(const Json& config) {
  const std::vector<std::string> names{"x", "y"};
  const ErrorStructure s(names, DiagonalCovariance{Vector::Ones(2)});
  const Vector point = vector_from(config["point"]);
  if (point.size() != 2) fail("coherence point must have 2 coordinates");
  const std::vector<Expr> shear{s.parse("x + y"), s.parse("y")};
  const std::vector<Expr> inverse{s.parse("x - y"), s.parse("y")};

  const Frame f0 = base_frame(s, point);
  const Transport t1 = pushforward(shear, f0);
  const Transport t2 = pushforward(inverse, t1.frame);
  const double deviation = (t2.frame.gamma - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff();

  const std::vector<std::vector<Expr>> stages{shear, inverse};
  const NaiveChain naive = propagate_naive(stages, s, point);

  Json naive_errors = Json::array();
  for (const Vector& v : naive.stage_errors) naive_errors.push_back(vector_json(v));
  Outcome out;
  out.results = {{"map", {{"forward", {"x + y", "y"}}, {"inverse", {"x - y", "y"}}}},
                 {"coherent", {{"stages", {frame_json(f0), frame_json(t1.frame), frame_json(t2.frame)}},
                               {"recovered_gamma", matrix_json(t2.frame.gamma)},
                               {"max_deviation_from_identity", deviation}}},
                 {"naive", {{"stage_errors", naive_errors},
                            {"first_coordinate_error", naive.errors()(0)}}}};
  out.table.push_back({"stage", "coherent_sd_x", "coherent_sd_y", "naive_sd_x", "naive_sd_y"});
  const Frame* frames[] = {&f0, &t1.frame, &t2.frame};
  for (std::size_t i = 0; i < 3; ++i) {
    out.table.push_back({std::to_string(i), num(std::sqrt(frames[i]->gamma(0, 0))),
                         num(std::sqrt(frames[i]->gamma(1, 1))), num(naive.stage_errors[i](0)),
                         num(naive.stage_errors[i](1))});
  }
  return out;
}

// -------------------------------------------------------------------- limit

Outcome do_limit(const Json& config) {
  const ErrorStructure s = structure_from_json(config["structure"]);
  const std::vector<Expr> seq = sequence_from_json(config["sequence"], s);
  const auto samples = config["samples"].get<std::size_t>();
  const auto seed = config["seed"].get<std::uint64_t>();
  const LimitReport r = extend_by_limit(seq, s, samples, seed, workers_of(config));

  Json l2 = Json::array(), energy = Json::array();
  for (double v : r.l2_increments) l2.push_back(real(v));
  for (double v : r.energy_increments) energy.push_back(real(v));
  Outcome out;
  out.results = {
      {"terms", seq.size()},
      {"is_cauchy_in_D", r.is_cauchy_in_D},
      {"l2_increments", l2},
      {"energy_increments", energy},
      {"limiting_energy", r.limiting_energy ? real(*r.limiting_energy) : Json(nullptr)},
      {"decision",
       {{"rule", "dyadic tail blocks: ||F_K - F_{K/2}||_D <= ratio * ||F_{K/2} - F_{K/4}||_D, "
                 "or every increment below the negligible threshold"},
        {"ratio_threshold", kCauchyRatio},
        {"negligible_threshold", kNegligibleIncrement},
        {"block_previous", real(r.block_previous)},
        {"block_last", real(r.block_last)},
        {"block_ratio", real(r.block_ratio)},
        {"increment_fit_ratio", real(r.increment_fit_ratio)},
        {"all_increments_negligible", r.all_increments_negligible}}},
      {"samples", r.samples},
      {"seed", r.seed}};
  out.table.push_back({"N", "l2_increment", "energy_increment"});
  for (std::size_t i = 0; i < r.l2_increments.size(); ++i) {
    out.table.push_back({std::to_string(i + 1), num(r.l2_increments[i]), num(r.energy_increments[i])});
  }
  return out;
}

// ----------------------------------------------------------------- sequence

BitSequence load_source(const Json& src) {
  const std::string kind = src["kind"].get<std::string>();
  if (kind == "champernowne") return champernowne_bits(src["count"].get<std::size_t>());
  if (kind == "prng") return prng_bits(src["count"].get<std::size_t>(), src["seed"].get<std::uint64_t>());
  const std::string path = src["path"].get<std::string>();
  if (src["format"].get<std::string>() == "packed") {
    std::optional<std::size_t> count;
    if (!src["count"].is_null()) count = src["count"].get<std::size_t>();
    return read_packed_bits(path, count);
  }
  return read_ascii_bits(path);
}

void write_sequence(const Json& output, const BitSequence& seq) {
  if (output.is_null()) return;
  const std::string path = output["path"].get<std::string>();
  if (output["format"].get<std::string>() == "packed") {
    write_packed_bits(path, seq);
  } else {
    write_ascii_bits(path, seq);
  }
}

Outcome do_generate(const Json& config) {
  const BitSequence seq = load_source(config["source"]);
  write_sequence(config["output"], seq);
  Outcome out;
  out.results = sequence_summary(seq);
  return out;
}

Outcome do_analyze(const Json& config) {
  const BitSequence seq = load_source(config["source"]);
  const auto kmax = config["kmax"].get<unsigned>();
  const auto burn_in = config["lil_burn_in"].get<std::size_t>();
  const NormalityReport report = normality_report(seq, kmax);
  Outcome out;
  Json rows = Json::array();
  out.table.push_back({"k", "windows", "max_deviation", "chi_square", "degrees_of_freedom"});
  for (const NormalityRow& r : report.rows) {
    rows.push_back({{"k", r.k},
                    {"windows", r.windows},
                    {"max_deviation", r.max_deviation},
                    {"chi_square", r.chi_square},
                    {"degrees_of_freedom", r.degrees_of_freedom}});
    out.table.push_back({std::to_string(r.k), std::to_string(r.windows), num(r.max_deviation),
                         num(r.chi_square), std::to_string(r.degrees_of_freedom)});
  }
  out.results = {{"sequence", sequence_summary(seq)},
                 {"rows", rows},
                 {"chi_square_note", "approximate: sliding windows are dependent"},
                 {"low_power", report.low_power},
                 {"lil_statistic", seq.size() >= burn_in ? Json(lil_statistic(seq, burn_in)) : Json(nullptr)}};
  if (report.low_power) {
    out.warnings.push_back("low power: length " + std::to_string(seq.size()) + " is below 10 * 2^" +
                           std::to_string(kmax));
  }
  if (seq.size() < burn_in) out.warnings.push_back("sequence shorter than the LIL burn-in; statistic omitted");
  return out;
}

Outcome do_select(const Json& config) {
  const BitSequence seq = load_source(config["source"]);
  const SelectionRule rule = rule_from_json(config["rule"]);
  const BitSequence sub = select_subsequence(seq, rule);
  write_sequence(config["output"], sub);
  Outcome out;
  const double mean = sub.size() ? static_cast<double>(ones(sub)) / static_cast<double>(sub.size()) : 0.0;
  out.results = {{"input", sequence_summary(seq)},
                 {"selected", sequence_summary(sub)},
                 {"mean", sub.size() ? Json(mean) : Json(nullptr)},
                 {"clt_bound", sub.size() ? Json(4.0 / (2.0 * std::sqrt(static_cast<double>(sub.size()))))
                                          : Json(nullptr)}};
  if (sub.size() == 0) out.warnings.push_back("rule selected no positions");
  return out;
}

constexpr std::size_t kMaxReportedTrajectory = 100000;

Outcome do_bet(const Json& config) {
  const BettingStrategy strategy = strategy_from_json(config["strategy"]);
  const double initial = config["initial"].get<double>();
  Outcome out;
  if (config["mode"].get<std::string>() == "ensemble") {
    const EnsembleResult r = martingale_ensemble(
        strategy, initial, config["sequences"].get<std::size_t>(), config["length"].get<std::size_t>(),
        config["seed"].get<std::uint64_t>(), workers_of(config));
    const bool within = std::abs(r.mean_final - initial) <= 3.0 * r.std_error;
    out.results = {{"mean_final", r.mean_final},
                   {"std_error", r.std_error},
                   {"sequences", r.sequences},
                   {"length", r.length},
                   {"seed", r.seed},
                   {"within_3_std_errors", within}};
    out.table = {{"mean_final", "std_error", "sequences", "length"},
                 {num(r.mean_final), num(r.std_error), std::to_string(r.sequences), std::to_string(r.length)}};
    return out;
  }
  const BitSequence seq = load_source(config["source"]);
  const std::vector<double> capital = martingale_capital(seq, strategy, initial);
  Json trajectory = Json::array();
  double lo = initial, hi = initial;
  out.table.push_back({"n", "capital"});
  for (std::size_t i = 0; i < capital.size(); ++i) {
    lo = std::min(lo, capital[i]);
    hi = std::max(hi, capital[i]);
    out.table.push_back({std::to_string(i + 1), num(capital[i])});
    if (capital.size() <= kMaxReportedTrajectory) trajectory.push_back(capital[i]);
  }
  out.results = {{"sequence", sequence_summary(seq)},
                 {"final", capital.empty() ? initial : capital.back()},
                 {"min", lo},
                 {"max", hi},
                 {"trajectory", capital.size() <= kMaxReportedTrajectory ? trajectory : Json(nullptr)}};
  if (capital.size() > kMaxReportedTrajectory) {
    out.warnings.push_back("trajectory longer than " + std::to_string(kMaxReportedTrajectory) +
                           " omitted from the report; use --csv");
  }
  return out;
}

// ------------------------------------------------------------- command line

struct Common {
  std::string out;
  std::string csv;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--out", c.out, "Write the JSON report here instead of stdout");
  cmd->add_option("--csv", c.csv, "Write the tabular part of the results as CSV");
}

struct StructureOpts {
  std::string structure;
  std::string sigma;
  std::string vars;
};

void add_structure(CLI::App* cmd, StructureOpts& s) {
  cmd->add_option("--structure", s.structure, "Structure JSON file");
  cmd->add_option("--sigma", s.sigma, "Constant diagonal covariance, diag:a,b,...");
  cmd->add_option("--vars", s.vars, "Variable names for --sigma, comma separated");
}

Json resolve_structure(const StructureOpts& s) {
  if (!s.structure.empty()) {
    if (!s.sigma.empty()) fail("give either --structure or --sigma, not both");
    return structure_to_json(structure_from_json(read_json_file(s.structure)));
  }
  if (s.sigma.empty()) fail("a structure is required: --structure FILE or --sigma diag:... --vars ...");
  if (s.vars.empty()) fail("--sigma needs --vars");
  return structure_to_json(structure_from_shorthand(s.sigma, s.vars));
}

struct SourceOpts {
  std::string input;
  bool packed = false;
  std::optional<std::size_t> count;
  std::string generator;
  std::uint64_t seed = 0;
};

void add_source(CLI::App* cmd, SourceOpts& s) {
  cmd->add_option("--input", s.input, "Sequence file ('0'/'1' text, or packed with --packed)");
  cmd->add_flag("--packed", s.packed, "Sequence files are packed bytes, most significant bit first");
  cmd->add_option("--count", s.count, "Number of bits");
  cmd->add_option("--generator", s.generator, "champernowne or prng")
      ->check(CLI::IsMember({"champernowne", "prng"}));
  cmd->add_option("--seed", s.seed, "Seed for the prng generator (default 0)");
}

Json resolve_source(const SourceOpts& s) {
  if (!s.input.empty()) {
    if (!s.generator.empty()) fail("give either --input or --generator, not both");
    return {{"kind", "file"},
            {"path", s.input},
            {"format", s.packed ? "packed" : "ascii"},
            {"count", s.count ? Json(*s.count) : Json(nullptr)}};
  }
  if (s.generator.empty()) fail("a sequence is required: --input FILE or --generator NAME --count N");
  if (!s.count) fail("--generator needs --count");
  if (*s.count == 0) fail("--count must be positive");
  if (s.generator == "champernowne") return {{"kind", "champernowne"}, {"count", *s.count}};
  return {{"kind", "prng"}, {"count", *s.count}, {"seed", s.seed}};
}

Json resolve_output(const std::string& path, bool packed) {
  if (path.empty()) return nullptr;
  return {{"path", path}, {"format", packed ? "packed" : "ascii"}};
}

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_csv(const std::string& path, const Outcome& outcome) {
  std::ofstream f(path);
  if (!f) throw DomainError("cannot write " + path);
  for (const auto& row : outcome.table) {
    for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << csv_escape(row[i]);
    f << '\n';
  }
}

void emit(const Json& report, const Common& common, std::ostream& out) {
  const std::string text = report.dump(2) + "\n";
  if (common.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(common.out);
  if (!f) throw DomainError("cannot write " + common.out);
  f << text;
}

// Reports hold what JSON can represent; compare after the same round trip.
Json round_trip(const Json& j) { return Json::parse(j.dump()); }

}  // namespace

Outcome execute(const Json& config) {
  try {
    const std::string command = config.at("command").get<std::string>();
    if (command == "propagate") return do_propagate(config);
    if (command == "oracle") return do_oracle(config);
    if (command == "coherence") return do_coherence(config);
    if (command == "limit") return do_limit(config);
    if (command == "sequence") {
      const std::string action = config.at("action").get<std::string>();
      if (action == "generate") return do_generate(config);
      if (action == "analyze") return do_analyze(config);
      if (action == "select") return do_select(config);
      if (action == "bet") return do_bet(config);
      fail("unknown sequence action '" + action + "'");
    }
    fail("unknown command '" + command + "'");
  } catch (const Json::exception& e) {
    fail(std::string("malformed configuration: ") + e.what());
  }
}

Json make_report(const std::vector<std::string>& command, const Json& config, const Outcome& outcome) {
  return {{"schema", kSchemaName},
          {"version", kVersion},
          {"command", command},
          {"config", config},
          {"results", outcome.results},
          {"warnings", outcome.warnings}};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Error calculus with Dirichlet-form error structures, and a bit-sequence lab"};
  app.name(args.empty() ? "errstruct" : args[0]);
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  StructureOpts structure;
  SourceOpts source;
  std::string expr, point, spec, rule_path, strategy_path, file, report_path, generator_out;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::optional<unsigned> rerun_workers;
  double epsilon = kDefaultGammaEpsilon, bias_epsilon = kDefaultBiasEpsilon;
  std::size_t samples = 100000, limit_samples = 10000, sequences = 0, length = 0;
  unsigned kmax = 8;
  std::size_t burn_in = 10;
  double initial = 1.0, stake = -1.0;
  unsigned predict = 1;
  bool file_packed = false;

  auto* propagate = app.add_subcommand("propagate", "Value, gradient, Gamma and bias of an expression");
  propagate->add_option("--expr", expr, "Expression")->required();
  propagate->add_option("--point", point, "Base point, comma separated")->required();
  add_structure(propagate, structure);
  add_common(propagate, common);

  auto* oracle = app.add_subcommand("oracle", "Engine against the Monte Carlo perturbation oracles");
  oracle->add_option("--expr", expr, "Expression")->required();
  oracle->add_option("--point", point, "Base point, comma separated")->required();
  oracle->add_option("--epsilon", epsilon, "Perturbation scale for Gamma")->capture_default_str();
  oracle->add_option("--bias-epsilon", bias_epsilon, "Perturbation scale for the bias")->capture_default_str();
  oracle->add_option("--samples", samples, "Monte Carlo samples")->capture_default_str();
  oracle->add_option("--seed", seed, "Seed (default 0)");
  oracle->add_option("--workers", workers, "Worker threads; results do not depend on it")->capture_default_str();
  add_structure(oracle, structure);
  add_common(oracle, common);

  auto* coherence = app.add_subcommand("coherence", "Shear round trip: coherent transport against the naive chain");
  coherence->add_option("--point", point, "Base point (default 1,2)");
  add_common(coherence, common);

  auto* limit = app.add_subcommand("limit", "Cauchy test in the Dirichlet norm for a sequence F_1..F_K");
  limit->add_option("--spec", spec, "Sequence spec JSON file")->required();
  limit->add_option("--samples", limit_samples, "Base-law samples (grid laws use their own points)")
      ->capture_default_str();
  limit->add_option("--seed", seed, "Seed (default 0)");
  limit->add_option("--workers", workers, "Worker threads; results do not depend on it")->capture_default_str();
  add_structure(limit, structure);
  add_common(limit, common);

  auto* sequence = app.add_subcommand("sequence", "Bit-sequence lab");
  sequence->require_subcommand(1);
  auto* generate = sequence->add_subcommand("generate", "Generate a sequence");
  generate->add_option("--generator", source.generator, "champernowne or prng")
      ->required()
      ->check(CLI::IsMember({"champernowne", "prng"}));
  generate->add_option("--count", source.count, "Number of bits")->required();
  generate->add_option("--seed", source.seed, "Seed for prng (default 0)");
  generate->add_option("--file", file, "Write the sequence here");
  generate->add_flag("--packed", file_packed, "Write packed bytes instead of '0'/'1' text");
  add_common(generate, common);

  auto* analyze = sequence->add_subcommand("analyze", "Block frequencies, chi-square and LIL statistic");
  add_source(analyze, source);
  analyze->add_option("--kmax", kmax, "Largest block length")->capture_default_str();
  analyze->add_option("--burn-in", burn_in, "First n for the LIL statistic")->capture_default_str();
  add_common(analyze, common);

  auto* select = sequence->add_subcommand("select", "Apply a finite-state selection rule");
  add_source(select, source);
  select->add_option("--rule", rule_path, "Rule JSON file")->required();
  select->add_option("--file", file, "Write the selected subsequence here ('0'/'1' text)");
  add_common(select, common);

  auto* bet = sequence->add_subcommand("bet", "Martingale capital of a betting strategy");
  add_source(bet, source);
  bet->add_option("--strategy", strategy_path, "Strategy JSON file");
  bet->add_option("--stake", stake, "Constant stake fraction, instead of --strategy");
  bet->add_option("--predict", predict, "Predicted bit for --stake")->check(CLI::Range(0, 1));
  bet->add_option("--initial", initial, "Initial capital")->capture_default_str();
  bet->add_option("--ensemble", sequences, "Run over this many prng sequences (seeded by --seed)");
  bet->add_option("--length", length, "Sequence length for --ensemble");
  bet->add_option("--workers", workers, "Worker threads for --ensemble")->capture_default_str();
  add_common(bet, common);

  auto* rerun = app.add_subcommand("rerun", "Re-run a report's configuration and compare results");
  rerun->add_option("report", report_path, "Report JSON file")->required();
  rerun->add_option("--workers", rerun_workers, "Override the worker count");
  add_common(rerun, common);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    Json config;
    std::optional<Json> previous;
    if (*propagate || *oracle) {
      config = {{"command", *propagate ? "propagate" : "oracle"},
                {"expr", print_canonical(structure_from_json(resolve_structure(structure)).parse(expr))},
                {"structure", resolve_structure(structure)},
                {"point", vector_json(parse_real_list(point, "--point"))}};
      if (*oracle) {
        config["epsilon"] = epsilon;
        config["bias_epsilon"] = bias_epsilon;
        config["samples"] = samples;
        config["seed"] = seed;
        config["workers"] = workers;
        config["chunks"] = chunk_count(samples);
      }
    } else if (*coherence) {
      config = {{"command", "coherence"},
                {"point", vector_json(point.empty() ? Vector(Vector::LinSpaced(2, 1.0, 2.0))
                                                    : parse_real_list(point, "--point"))}};
    } else if (*limit) {
      config = {{"command", "limit"},
                {"sequence", read_json_file(spec)},
                {"structure", resolve_structure(structure)},
                {"samples", limit_samples},
                {"seed", seed},
                {"workers", workers},
                {"chunks", chunk_count(limit_samples)}};
    } else if (*sequence) {
      config = {{"command", "sequence"}};
      if (*generate) {
        config["action"] = "generate";
        config["source"] = resolve_source(source);
        config["output"] = resolve_output(file, file_packed);
      } else if (*analyze) {
        config["action"] = "analyze";
        config["source"] = resolve_source(source);
        config["kmax"] = kmax;
        config["lil_burn_in"] = burn_in;
      } else if (*select) {
        config["action"] = "select";
        config["source"] = resolve_source(source);
        config["rule"] = rule_to_json(rule_from_json(read_json_file(rule_path)));
        config["output"] = resolve_output(file, false);
      } else {
        config["action"] = "bet";
        if (strategy_path.empty() == (stake < 0.0)) fail("give exactly one of --strategy or --stake");
        const BettingStrategy strategy =
            strategy_path.empty() ? BettingStrategy::constant(stake, static_cast<std::uint8_t>(predict))
                                  : strategy_from_json(read_json_file(strategy_path));
        config["strategy"] = strategy_to_json(strategy);
        config["initial"] = initial;
        if (sequences > 0) {
          if (length == 0) fail("--ensemble needs --length");
          if (!source.input.empty() || !source.generator.empty()) {
            fail("--ensemble draws its own sequences; drop --input/--generator");
          }
          config["mode"] = "ensemble";
          config["sequences"] = sequences;
          config["length"] = length;
          config["seed"] = source.seed;
          config["workers"] = workers;
          config["chunks"] = chunk_count(sequences);
        } else {
          config["mode"] = "sequence";
          config["source"] = resolve_source(source);
        }
      }
    } else {
      const Json old = read_json_file(report_path);
      if (!old.is_object() || !old.contains("config") || !old.contains("results")) {
        fail(report_path + " is not a report");
      }
      config = old["config"];
      if (rerun_workers && config.contains("workers")) config["workers"] = *rerun_workers;
      previous = old["results"];
    }

    const Outcome outcome = execute(config);
    Json report = make_report(args, config, outcome);
    if (rerun_workers && !config.contains("workers")) {
      report["warnings"].push_back("--workers ignored: this command is single-threaded");
    }
    if (previous) {
      const Json now = round_trip(outcome.results);
      Json differences = Json::array();
      for (const Json& op : Json::diff(*previous, now)) differences.push_back(op["path"]);
      report["rerun"] = {{"source", report_path}, {"identical", differences.empty()}, {"differences", differences}};
    }
    if (!common.csv.empty()) write_csv(common.csv, outcome);
    emit(report, common, out);
    return 0;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return 3;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace errstruct::cli
