#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace memescore::cli {

enum ExitCode : int { kOk = 0, kUsageError = 1, kDataError = 2, kInternalError = 3 };

// Runs the command line (without argv[0]) against the given streams and
// returns the process exit code.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace memescore::cli
