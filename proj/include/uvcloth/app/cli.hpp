#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace uvcloth::app {

/// Runs one CLI command (args exclude the program name). Returns 0 on
/// success, 1 on a user error (bad arguments, missing or invalid inputs) and
/// 2 on an internal failure. Every run appends a JSON line to the configured
/// runs log.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace uvcloth::app
