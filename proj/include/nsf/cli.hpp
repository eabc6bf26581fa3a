#pragma once

#include <string>
#include <vector>

namespace nsf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the nsf tool. args excludes the program name.
int run(const std::vector<std::string>& args);

}  // namespace nsf::cli
