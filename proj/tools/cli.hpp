#pragma once

// topomap command-line driver. Exit codes: 0 success, 2 usage or validation,
// 3 runtime failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace topomap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace topomap::cli
