#pragma once

// Batch entry points: synth, train, eval, ablate, stats.

#include <iosfwd>
#include <string>
#include <vector>

namespace mexa::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kUsage = 2 };

/// Parses `args` (without the program name) and runs one command. Messages
/// go to `out` / `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mexa::cli
