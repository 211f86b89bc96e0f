#pragma once

#include <ostream>

namespace nams::harness {

/// Exit codes: 0 success, 1 other failure, 2 configuration error,
/// 3 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Entry point of the `nams` command line tool. Progress goes to `log`.
int run_cli(int argc, const char* const* argv, std::ostream& log);

}  // namespace nams::harness
