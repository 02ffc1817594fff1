#pragma once

#include <string>
#include <vector>

namespace mkv::cli {

/// Runs the command-line front end on the given arguments (program name
/// excluded). Exit codes: 0 success, 2 validation/configuration failure
/// (with a machine-readable error listing on stderr), 3 numerical failure.
int run(const std::vector<std::string>& args);

}  // namespace mkv::cli
