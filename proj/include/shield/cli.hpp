#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace shield {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  ///< ran, but a check did not pass
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

/// Entry point behind the `shield_cli` binary. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace shield
