#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fsdim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerificationFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `fsdim` command; `args` excludes the program name. Returns
/// kExitOk, kExitVerificationFailure or kExitUsage.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fsdim
