#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dnpvi::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kValidationFailed = 1, kUsageError = 2, kSolverFailure = 3 };

/// Runs the command line `args` (without the program name). Reports go to
/// `out`, warnings and errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dnpvi::cli
