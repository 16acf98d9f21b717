#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "errstruct/config.hpp"

namespace errstruct::cli {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kSchemaName = "report-v1";

// Slack for the Taylor remainder in the engine/oracle verdict:
// |estimate - engine| <= 3 std_error + kAgreementConstant * epsilon * |engine|.
inline constexpr double kAgreementConstant = 10.0;

struct Outcome {
  Json results;
  Json warnings = Json::array();
  // Tabular part of the results for --csv; the first row is the header.
  std::vector<std::vector<std::string>> table;
};

// Runs a fully resolved configuration, as echoed under "config" in reports.
// Throws UsageError or DomainError.
Outcome execute(const Json& config);

// Full report for a configuration.
Json make_report(const std::vector<std::string>& command, const Json& config, const Outcome& outcome);

// Command-line entry point; args[0] is the program name. Returns the exit
// code: 0 success, 2 usage or configuration error, 3 runtime domain error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace errstruct::cli
