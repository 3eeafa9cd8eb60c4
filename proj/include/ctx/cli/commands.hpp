#pragma once

#include <string>
#include <vector>

namespace ctx {

// Dispatches one CLI invocation (argv without the program name) and returns
// the process exit code. All diagnostics go to stderr as a single line.
int run_command(const std::vector<std::string>& argv);

} // namespace ctx
