#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace skewlab {

/// Exit codes of run_command.
enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitVerdictFail = 2 };

/// Entry point of the command-line tool. args[0] is the program name.
///
///   skewlab simulate     --config PATH [--out DIR] [--seed N] [--eps X]
///   skewlab local-time   --config PATH [--out DIR] [--seed N] [--eps X]
///   skewlab check        --config PATH [--out DIR]
///   skewlab study        --config PATH [--out DIR] [--seed N]
///   skewlab verify-lemma --config PATH --which {1,3} [--out DIR] [--seed N]
int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                std::ostream& err = std::cerr);

int run_command(int argc, const char* const* argv, std::ostream& out = std::cout,
                std::ostream& err = std::cerr);

}  // namespace skewlab
