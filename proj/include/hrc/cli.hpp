#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hrc::cli {

// Full command-line driver behind a testable seam: `args` excludes argv[0],
// machine-readable results go to `out`, diagnostics to `err`.
// Exit codes: 0 success, 2 configuration/usage errors, 1 runtime failures.
int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hrc::cli
