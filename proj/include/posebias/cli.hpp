#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace posebias::cli {

enum ExitCode : int {
  kSuccess = 0,
  kDomainError = 1,  // bad data or config; JSON error record on stderr
  kUsageError = 2,
};

// Entry point behind the `posebias` binary. Summary JSON goes to `out`,
// diagnostics to `err`.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace posebias::cli
