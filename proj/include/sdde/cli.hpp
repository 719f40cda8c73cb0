#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sdde {

enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_usage = 2 };

/// Entry point behind the `sdde` executable; `args` excludes the program name.
/// Exit codes: 0 success, 1 failed checks or solver failure, 2 usage or
/// configuration error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace sdde
