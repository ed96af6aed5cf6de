#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hazard_dantzig {

/// Runs one CLI invocation; `args` excludes the program name. Returns the process exit code.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hazard_dantzig
