#include "errstruct/config.hpp"

#include <charconv>
#include <fstream>

#include "errstruct/types.hpp"

namespace errstruct {

namespace {

[[noreturn]] void fail(const std::string& message) { throw UsageError(message); }

const Json& field(const Json& doc, const char* key, const char* where) {
  if (!doc.is_object()) fail(std::string(where) + " must be a JSON object");
  auto it = doc.find(key);
  if (it == doc.end()) fail(std::string(where) + " is missing \"" + key + "\"");
  return *it;
}

double real(const Json& v, const char* what) {
  if (!v.is_number()) fail(std::string(what) + " must be a number");
  return v.get<double>();
}

std::size_t count(const Json& v, const char* what) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    fail(std::string(what) + " must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

std::string text(const Json& v, const char* what) {
  if (!v.is_string()) fail(std::string(what) + " must be a string");
  return v.get<std::string>();
}

const Json& array(const Json& v, const char* what) {
  if (!v.is_array()) fail(std::string(what) + " must be an array");
  return v;
}

Vector real_vector(const Json& v, const char* what) {
  array(v, what);
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = real(v[i], what);
  return out;
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

std::vector<std::array<std::size_t, 2>> transitions_from(const Json& doc, const char* where) {
  const std::size_t states = count(field(doc, "states", where), "states");
  const Json& t = array(field(doc, "transitions", where), "transitions");
  if (t.size() != states) fail("transitions needs one [on0, on1] pair per state");
  std::vector<std::array<std::size_t, 2>> out;
  for (const Json& pair : t) {
    if (!pair.is_array() || pair.size() != 2) fail("each transition must be a pair [on0, on1]");
    out.push_back({count(pair[0], "transition target"), count(pair[1], "transition target")});
  }
  return out;
}

std::size_t initial_from(const Json& doc) {
  return doc.contains("initial") ? count(doc["initial"], "initial") : 0;
}

std::string name_from(const Json& doc) {
  return doc.contains("name") ? text(doc["name"], "name") : std::string("fsm");
}

Json machine_json(const std::vector<std::array<std::size_t, 2>>& transitions, std::size_t initial,
                  const std::string& name) {
  Json t = Json::array();
  for (const auto& pair : transitions) t.push_back({pair[0], pair[1]});
  return {{"name", name}, {"states", transitions.size()}, {"initial", initial}, {"transitions", t}};
}

}  // namespace

ErrorStructure structure_from_json(const Json& doc) {
  const char* where = "structure";
  std::vector<std::string> names;
  for (const Json& v : array(field(doc, "vars", where), "vars")) names.push_back(text(v, "variable name"));
  const std::size_t n = names.size();

  const Json& sigma = field(doc, "sigma", where);
  const std::string kind = text(field(sigma, "kind", "sigma"), "sigma kind");
  CovarianceField cov;
  if (kind == "diag") {
    cov = DiagonalCovariance{real_vector(field(sigma, "values", "sigma"), "sigma values")};
  } else if (kind == "full") {
    const Json& rows = array(field(sigma, "matrix", "sigma"), "sigma matrix");
    if (rows.size() != n) fail("sigma matrix must have one row per variable");
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const Vector row = real_vector(rows[i], "sigma matrix row");
      if (static_cast<std::size_t>(row.size()) != n) fail("sigma matrix must be square");
      m.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    cov = FullCovariance{m};
  } else if (kind == "exprs") {
    const Json& rows = array(field(sigma, "entries", "sigma"), "sigma entries");
    if (rows.size() != n) fail("sigma entries must have one row per variable");
    ExpressionCovariance ec;
    for (std::size_t i = 0; i < n; ++i) {
      const Json& row = array(rows[i], "sigma entries row");
      if (row.size() != n - i) fail("row i of sigma entries must hold the n - i upper-triangle entries");
      for (const Json& e : row) ec.upper.push_back(parse(text(e, "sigma entry"), names));
    }
    cov = std::move(ec);
  } else {
    fail("sigma kind must be diag, full or exprs");
  }

  std::optional<BaseLaw> law;
  if (doc.contains("law") && !doc["law"].is_null()) {
    const Json& l = doc["law"];
    const std::string lk = text(field(l, "kind", "law"), "law kind");
    if (lk == "uniform") {
      const Json& box = array(field(l, "box", "law"), "law box");
      UniformBox u{Vector(static_cast<Eigen::Index>(box.size())),
                   Vector(static_cast<Eigen::Index>(box.size()))};
      for (std::size_t i = 0; i < box.size(); ++i) {
        const Vector ab = real_vector(box[i], "law box interval");
        if (ab.size() != 2) fail("law box intervals must be [lower, upper]");
        u.lower(static_cast<Eigen::Index>(i)) = ab(0);
        u.upper(static_cast<Eigen::Index>(i)) = ab(1);
      }
      law = std::move(u);
    } else if (lk == "gauss") {
      law = IndependentGaussians{real_vector(field(l, "mean", "law"), "law mean"),
                                 real_vector(field(l, "sd", "law"), "law sd")};
    } else if (lk == "grid") {
      const Vector ab = real_vector(field(l, "interval", "law"), "law interval");
      if (ab.size() != 2) fail("grid interval must be [lower, upper]");
      law = Grid1d{ab(0), ab(1), count(field(l, "points", "law"), "grid points")};
    } else {
      fail("law kind must be uniform, gauss or grid");
    }
  }
  return ErrorStructure(std::move(names), std::move(cov), std::move(law));
}

Json structure_to_json(const ErrorStructure& s) {
  Json doc;
  doc["vars"] = s.names();
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DiagonalCovariance>) {
          doc["sigma"] = {{"kind", "diag"}, {"values", vector_json(c.variances)}};
        } else if constexpr (std::is_same_v<T, FullCovariance>) {
          Json rows = Json::array();
          for (Eigen::Index i = 0; i < c.matrix.rows(); ++i) {
            rows.push_back(vector_json(c.matrix.row(i).transpose()));
          }
          doc["sigma"] = {{"kind", "full"}, {"matrix", rows}};
        } else {
          const std::size_t n = s.dimension();
          Json rows = Json::array();
          std::size_t k = 0;
          for (std::size_t i = 0; i < n; ++i) {
            Json row = Json::array();
            for (std::size_t j = i; j < n; ++j) row.push_back(print_canonical(c.upper[k++]));
            rows.push_back(row);
          }
          doc["sigma"] = {{"kind", "exprs"}, {"entries", rows}};
        }
      },
      s.covariance());
  if (s.law()) {
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, UniformBox>) {
            Json box = Json::array();
            for (Eigen::Index i = 0; i < l.lower.size(); ++i) box.push_back({l.lower(i), l.upper(i)});
            doc["law"] = {{"kind", "uniform"}, {"box", box}};
          } else if constexpr (std::is_same_v<T, IndependentGaussians>) {
            doc["law"] = {{"kind", "gauss"}, {"mean", vector_json(l.mean)}, {"sd", vector_json(l.sd)}};
          } else {
            doc["law"] = {{"kind", "grid"}, {"interval", {l.lower, l.upper}}, {"points", l.points}};
          }
        },
        *s.law());
  }
  return doc;
}

Vector parse_real_list(std::string_view text, const char* what) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    std::string_view item = text.substr(pos, end - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty() && item.front() == '+') item.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      fail(std::string("cannot read ") + what + " entry '" + std::string(item) + "'");
    }
    values.push_back(v);
    if (end == text.size()) break;
    pos = end + 1;
  }
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

ErrorStructure structure_from_shorthand(std::string_view sigma, std::string_view vars) {
  constexpr std::string_view prefix = "diag:";
  if (sigma.substr(0, prefix.size()) != prefix) fail("--sigma must look like diag:a,b,...");
  const Vector values = parse_real_list(sigma.substr(prefix.size()), "--sigma");
  std::vector<std::string> names;
  std::size_t pos = 0;
  while (pos <= vars.size()) {
    const std::size_t end = std::min(vars.find(',', pos), vars.size());
    names.emplace_back(vars.substr(pos, end - pos));
    pos = end + 1;
  }
  if (names.size() != static_cast<std::size_t>(values.size())) {
    fail("--vars and --sigma must list the same number of coordinates");
  }
  return ErrorStructure(std::move(names), DiagonalCovariance{values});
}

SelectionRule rule_from_json(const Json& doc) {
  auto transitions = transitions_from(doc, "rule");
  std::vector<bool> select;
  for (const Json& d : array(field(doc, "decisions", "rule"), "decisions")) {
    const std::string s = text(d, "rule decision");
    if (s != "select" && s != "skip") fail("rule decisions must be \"select\" or \"skip\"");
    select.push_back(s == "select");
  }
  return SelectionRule(std::move(transitions), std::move(select), initial_from(doc), name_from(doc));
}

Json rule_to_json(const SelectionRule& rule) {
  Json doc = machine_json(rule.transitions(), rule.initial(), rule.name());
  Json d = Json::array();
  for (std::size_t i = 0; i < rule.states(); ++i) d.push_back(rule.selects(i) ? "select" : "skip");
  doc["decisions"] = d;
  return doc;
}

BettingStrategy strategy_from_json(const Json& doc) {
  auto transitions = transitions_from(doc, "strategy");
  std::vector<Bet> bets;
  for (const Json& d : array(field(doc, "decisions", "strategy"), "decisions")) {
    const double stake = real(field(d, "stake", "strategy decision"), "stake");
    const std::size_t predict = count(field(d, "predict", "strategy decision"), "predict");
    if (predict > 1) fail("predict must be 0 or 1");
    bets.push_back({stake, static_cast<std::uint8_t>(predict)});
  }
  return BettingStrategy(std::move(transitions), std::move(bets), initial_from(doc), name_from(doc));
}

Json strategy_to_json(const BettingStrategy& strategy) {
  Json doc = machine_json(strategy.transitions(), strategy.initial(), strategy.name());
  Json d = Json::array();
  for (std::size_t i = 0; i < strategy.states(); ++i) {
    d.push_back({{"stake", strategy.bet(i).stake}, {"predict", strategy.bet(i).predict}});
  }
  doc["decisions"] = d;
  return doc;
}

std::vector<Expr> sequence_from_json(const Json& doc, const ErrorStructure& s) {
  if (doc.is_object() && doc.contains("expressions")) {
    std::vector<Expr> out;
    for (const Json& e : array(doc["expressions"], "expressions")) out.push_back(s.parse(text(e, "expression")));
    return out;
  }
  const Json& fam = field(doc, "family", "sequence spec");
  const std::string term = text(field(fam, "term", "family"), "family term");
  const std::string index = text(field(fam, "index", "family"), "family index");
  const std::size_t k = count(field(fam, "K", "family"), "family K");
  if (k > 5000) fail("family K is limited to 5000 terms");

  std::vector<std::string> names = s.names();
  std::vector<Expr> fixed;
  for (std::size_t i = 0; i < s.dimension(); ++i) fixed.push_back(Expr::variable(i, s.names()[i]));
  names.push_back(index);
  const std::size_t index_slot = fixed.size();
  fixed.push_back(Expr::constant(0.0));
  if (fam.contains("constants")) {
    const Json& consts = fam["constants"];
    if (!consts.is_object()) fail("family constants must be an object");
    for (auto it = consts.begin(); it != consts.end(); ++it) {
      names.push_back(it.key());
      fixed.push_back(Expr::constant(real(it.value(), "family constant")));
    }
  }
  const Expr body = parse(term, names);

  std::vector<Expr> out;
  out.reserve(k);
  for (std::size_t n = 1; n <= k; ++n) {
    fixed[index_slot] = Expr::constant(static_cast<double>(n));
    const Expr t = substitute(body, fixed);
    out.push_back(n == 1 ? t : out.back() + t);
  }
  return out;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    fail(path + ": " + e.what());
  }
}

}  // namespace errstruct
