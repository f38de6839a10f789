#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace supsup::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitOther = 1;

/// Parses `args` (without the program name), runs the subcommand and returns
/// the process exit code. Progress goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace supsup::cli
