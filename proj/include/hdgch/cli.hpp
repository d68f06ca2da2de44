#pragma once

#include "hdgch/experiments.hpp"
#include "hdgch/projections.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace hdgch {

enum class ExitCode : int { success = 0, usage = 2, solver_failure = 3, check_failure = 4 };

/// Bad command line. `help` is set when usage text was requested explicitly.
class UsageError : public Error {
 public:
  UsageError(const std::string& what, std::string usage, bool help = false)
      : Error(what), usage_(std::move(usage)), help_(help) {}
  const std::string& usage() const { return usage_; }
  bool help() const { return help_; }

 private:
  std::string usage_;
  bool help_;
};

enum class Subcommand { convergence, simulate, project };

std::string to_string(Subcommand s);

/// Fully resolved command line: per-subcommand defaults already applied.
struct CliInvocation {
  Subcommand subcommand = Subcommand::convergence;
  RunConfig run;
  std::string case_name;     ///< manufactured | cross | disk
  std::vector<int> levels;   ///< convergence, project
  bool dt_rule = true;       ///< convergence: dt = 2 (h/sqrt2)^(k+2)
  double time = 0.3;         ///< project: evaluation time
  SimulationCase simulation; ///< simulate
  double h = 0.02;           ///< simulate: square side, subdivisions = round(1/h)
  std::string out = "out";
  bool check = false;
  std::vector<std::string> argv;  ///< as given, for the manifest
};

/// "3..5", "3,4,5" or "4".
std::vector<int> parse_levels(const std::string& s);

/// Parses argv (without the program name). Throws UsageError naming the flag.
CliInvocation parse_config(const std::vector<std::string>& args);

/// Command line that reproduces `inv` exactly (all values spelled out).
std::vector<std::string> canonical_args(const CliInvocation& inv);

/// Runs the invocation, writing outputs and manifest.json under inv.out.
ExitCode run_invocation(const CliInvocation& inv, std::ostream& log);

/// parse_config + run_invocation with error reporting; returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hdgch
