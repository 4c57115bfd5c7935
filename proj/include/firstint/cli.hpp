#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "firstint/flow.hpp"
#include "firstint/scenarios.hpp"

namespace firstint::cli {

/// Stable process exit codes.
enum ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kInvalidInput = 2,
  kMathFailure = 3,
  kVerificationFailure = 4,
};

/// A scenario JSON document after validation.
struct ScenarioFile {
  Scenario scenario;
  IntegratorConfig integrator;
  Backend backend = Backend::Both;
};

/// Parses and validates a scenario document. Throws ValidationError (or a
/// parse error subclass) on any schema or expression problem.
ScenarioFile parse_scenario_file(std::string_view json_text);
ScenarioFile load_scenario_file(const std::filesystem::path& path);

/// CSV with header t,x1..xN,y1..yN,f1..fN and 17 significant digits.
std::string trajectory_csv(const Trajectory& trajectory, const PhaseSpace& space);
Trajectory read_trajectory_csv(std::string_view text);

std::string report_json(const ConservationReport& report);

/// Writes via a temporary file in the same directory followed by a rename.
void write_file_atomically(const std::filesystem::path& path, std::string_view contents);

/// Runs the command line; argv excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace firstint::cli
