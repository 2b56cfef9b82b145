#pragma once

#include <ostream>

namespace itemper::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitGuard = 3;

/// itemper <experiment> --config FILE [--seed N] [--replicas N] [--out DIR] [--threads N]
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace itemper::app
