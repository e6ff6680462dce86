#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lmd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitStageFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs the `lmd` command line. `args` excludes the program name. Returns
/// 0 on success, 1 when a stage fails, 2 on a usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lmd
