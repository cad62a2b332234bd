#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dua::cli {

/// Runs the `dua` command line. `args` excludes the program name.
/// Returns the process exit code: 0 on success, 1 on a failed stage,
/// 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dua::cli
