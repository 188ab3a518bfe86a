#pragma once

// Command-line front end: parse-log, score, simulate and mask-stats.

#include <iosfwd>

namespace cadc {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,          ///< unreadable input, parse or config error
  kExitValidation = 2,  ///< input parsed but violates record invariants
  kExitCollapse = 3,    ///< pruning emptied the population
  kExitUsage = 64,      ///< bad command line
};

/// Runs one invocation; `argv[0]` is the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cadc
