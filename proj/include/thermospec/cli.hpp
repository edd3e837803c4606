#pragma once

#include <string>
#include <vector>

namespace thermospec {

// Command-line front end; returns the process exit code.
// 0 = ok, 2 = configuration error, 3 = validation failure,
// 4 = solver non-convergence (results still written, flagged).
int run_cli(const std::vector<std::string>& args);

}  // namespace thermospec
