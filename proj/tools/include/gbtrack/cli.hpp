#pragma once

#include <string>
#include <vector>

namespace gbtrack::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kIo = 2, kInternal = 3 };

/// Runs one command line (args[0] is the program name) and returns the exit
/// code. Messages go to stdout/stderr.
int run(const std::vector<std::string>& args);

}  // namespace gbtrack::cli
