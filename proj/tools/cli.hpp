#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace enstack::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPipeline = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the binary and the tests. `args` excludes argv[0].
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace enstack::cli
