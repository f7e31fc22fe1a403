#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cicmap::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kIo = 2 };

// Runs one subcommand. Diagnostics go to `err`; data only to files.
int run(const std::vector<std::string>& args, std::ostream& err);
int run(int argc, char** argv);

}  // namespace cicmap::cli
