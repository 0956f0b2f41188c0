#pragma once

#include <iosfwd>

namespace smalleig {

/// Exit codes of the command-line driver.
enum ExitCode : int {
  kExitOk = 0,
  kExitVerifyFailed = 1,
  kExitUsage = 2,
  kExitRuntime = 3,
};

/// Entry point of the `smalleig` command (subcommands solve, bench, tune,
/// verify). Output goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace smalleig
