#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace protoeval {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,      // I/O, parse or validation failure
  kExitDiscrepancy = 2,  // declared numbers disagree with observed ones
  kExitUsage = 64,
};

/// Runs the command line `args` (args[0] is the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker cap from PROTO_EVAL_THREADS, else the hardware concurrency.
std::size_t thread_budget();

} // namespace protoeval
