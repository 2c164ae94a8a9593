#pragma once

#include <string_view>

namespace enstack {

inline constexpr std::string_view kVersion = "0.1.0";

}  // namespace enstack
