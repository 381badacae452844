#pragma once

#include <string>
#include <vector>

namespace netside {

inline constexpr const char* kToolVersion = "netside 1.0.0";

// Dispatches one CLI invocation (args exclude the program name). Returns the
// process exit code: 0 success, 1 usage, 2 I/O, 3 schema, 4 numerical,
// 5 insufficient data. Errors print one line "error: <category>: <message>"
// on stderr.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

} // namespace netside
