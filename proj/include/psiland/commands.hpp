#pragma once

#include <string>
#include <vector>

namespace psiland {

// Parses the command line (or a --manifest file), runs one subcommand and
// returns the process exit code: 0 success/PASS, 1 FAIL verdict,
// 2 precondition violation, 3 numerical non-convergence.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace psiland
