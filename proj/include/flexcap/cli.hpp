#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flexcap::cli {

/// Exit codes: 0 success / feasible, 1 infeasible, 2 usage, parse or input error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInfeasible = 1;
inline constexpr int kExitError = 2;

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads FLEXCAP_TOLERANCE, falling back to the default. Throws
/// Error(InvalidConfig) for values that are not positive finite numbers.
double tolerance_from_env();

}  // namespace flexcap::cli
