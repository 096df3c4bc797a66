#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace knightian::cli {

// Exit codes shared by all subcommands.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,          // bad flags, config, payoff or prior
  kAggregate = 3,      // equilibrium needs a constant aggregate endowment
  kSolver = 4,         // Negishi or PDE failure
  kSimulation = 5,     // no usable Monte Carlo paths
};

// Runs `knightian <args...>`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace knightian::cli
