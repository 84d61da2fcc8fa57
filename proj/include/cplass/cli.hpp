#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cplass {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2 };

/// Runs one command line (argv[0] is the program name).
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, with the arguments after the program name.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cplass
