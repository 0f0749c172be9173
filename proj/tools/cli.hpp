#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dlcz::cli {

inline constexpr const char *kToolVersion = "0.1.0";

/// Exit codes of the command-line tool.
enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNoConvergence = 3 };

/// Runs one `dlcz` invocation. `args` excludes the program name.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

int run_cli(int argc, char **argv);

} // namespace dlcz::cli
