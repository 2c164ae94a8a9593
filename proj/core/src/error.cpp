#include "enstack/error.hpp"

#include "enstack/hash.hpp"

#include <cstdio>

namespace enstack {
namespace {

std::string coverage_message(const std::string& model, const std::vector<std::string>& missing) {
  std::string msg = "probability table '" + model + "' is missing " +
                    std::to_string(missing.size()) + " id(s):";
  constexpr std::size_t kShown = 20;
  for (std::size_t i = 0; i < missing.size() && i < kShown; ++i) msg += " " + missing[i];
  if (missing.size() > kShown) msg += " ...";
  return msg;
}

}  // namespace

CoverageError::CoverageError(const std::string& model, std::vector<std::string> missing)
    : Error(coverage_message(model, missing)), missing_(std::move(missing)) {}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace enstack
