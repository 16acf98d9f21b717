#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "errstruct/error_structure.hpp"
#include "errstruct/sequence_lab.hpp"

namespace errstruct {

using Json = nlohmann::json;

// Structure documents:
//   {"vars": ["x", "y"],
//    "sigma": {"kind": "diag", "values": [..]}
//           | {"kind": "full", "matrix": [[..], ..]}
//           | {"kind": "exprs", "entries": [["s00", "s01"], ["s11"]]},
//    "law": {"kind": "uniform", "box": [[a, b], ..]}
//         | {"kind": "gauss", "mean": [..], "sd": [..]}
//         | {"kind": "grid", "interval": [a, b], "points": N}}
// "law" is optional. Malformed documents throw UsageError.
ErrorStructure structure_from_json(const Json& doc);
// Inverse of structure_from_json; expressions are written in canonical form.
Json structure_to_json(const ErrorStructure& s);

// "diag:a,b,..." with names "x,y,...".
ErrorStructure structure_from_shorthand(std::string_view sigma, std::string_view vars);

// {"states": S, "initial": i, "transitions": [[t0, t1], ..],
//  "decisions": ["select" | "skip", ..], "name": ".."}
SelectionRule rule_from_json(const Json& doc);
Json rule_to_json(const SelectionRule& rule);

// As rules, with "decisions": [{"stake": s, "predict": 0 | 1}, ..].
BettingStrategy strategy_from_json(const Json& doc);
Json strategy_to_json(const BettingStrategy& strategy);

// Sequence specs for the limit test: either {"expressions": ["..", ..]} or
// {"family": {"term": "sin(k*pi*x)/k^2", "index": "k", "K": 200,
//             "constants": {"pi": 3.14159..}}},
// the latter giving F_N = term(1) + .. + term(N) for N = 1..K.
std::vector<Expr> sequence_from_json(const Json& doc, const ErrorStructure& s);

// Comma-separated reals.
Vector parse_real_list(std::string_view text, const char* what);

Json read_json_file(const std::string& path);

}  // namespace errstruct
