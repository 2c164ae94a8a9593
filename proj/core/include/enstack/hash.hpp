#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace enstack {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// FNV-1a 64-bit. Pass a previous result as `state` to hash a concatenation.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset) noexcept {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

}  // namespace enstack
