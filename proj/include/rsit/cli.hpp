#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rsit::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kRuntimeFailure = 2 };

/// Runs one invocation. `args` excludes the program name, e.g. {"datagen", "--out", "bench"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rsit::cli
