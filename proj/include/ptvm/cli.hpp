#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ptvm::cli {

/// Exit codes: 0 success, 1 design failure or infeasible, 2 usage or I/O error.
enum ExitCode { kSuccess = 0, kFailure = 1, kUsage = 2 };

/// args[0] is the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "3,-3,0,0" -> {3, -3, 0, 0}; throws std::invalid_argument on junk.
std::vector<double> parse_vector(const std::string& text);

}  // namespace ptvm::cli
