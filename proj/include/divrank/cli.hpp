#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace divrank {

/// Runs one `divrank` subcommand. Returns 0 on success, 2 on a usage error
/// and 1 on a runtime failure (diagnostic on `err`). `args` excludes the
/// program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_command(int argc, const char* const* argv);

}  // namespace divrank
