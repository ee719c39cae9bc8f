#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vortex::cli {

// Runs one CLI invocation (args excludes the program name) and returns the
// process exit code: 0 success, 1 domain error, 2 usage or IO error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vortex::cli
