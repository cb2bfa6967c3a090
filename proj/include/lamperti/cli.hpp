#pragma once

// Command-line driver. Exit codes: 0 pass, 1 verification failure,
// 2 usage or validation error, 3 numeric failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace lamperti::cli {

enum ExitCode : int { exit_pass = 0, exit_verify_fail = 1, exit_usage = 2, exit_numeric = 3 };

/// Runs one command. `args` excludes the program name. Output that targets
/// `--out -` goes to `out`; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lamperti::cli
