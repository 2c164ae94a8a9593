#include "enstack/features.hpp"

#include "enstack/error.hpp"
#include "enstack/hash.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace enstack {

void check_feature_dim(std::uint32_t dim) {
  if (dim < kMinFeatureDim || (dim & (dim - 1)) != 0)
    throw ValidationError("feature dimension must be a power of two >= 1024, got " + std::to_string(dim));
}

std::uint32_t feature_bucket(std::string_view bytes, std::uint32_t dim) {
  return static_cast<std::uint32_t>(fnv1a64(bytes) & (dim - 1));
}

namespace {

FeatureVector finish(std::vector<std::uint32_t>& buckets, std::uint32_t dim, std::size_t norm_count) {
  FeatureVector fv{dim, {}};
  if (buckets.empty()) return fv;
  std::sort(buckets.begin(), buckets.end());
  const double scale = 1.0 / std::sqrt(static_cast<double>(norm_count));
  for (std::size_t i = 0; i < buckets.size();) {
    std::size_t j = i;
    while (j < buckets.size() && buckets[j] == buckets[i]) ++j;
    fv.entries.emplace_back(buckets[i], static_cast<double>(j - i) * scale);
    i = j;
  }
  return fv;
}

}  // namespace

FeatureVector featurize(std::span<const Token> tokens, std::uint32_t dim) {
  check_feature_dim(dim);
  std::vector<std::uint32_t> buckets;
  buckets.reserve(tokens.size() * 2);
  const std::uint64_t mask = dim - 1;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::uint64_t h = fnv1a64(tokens[i].text);
    buckets.push_back(static_cast<std::uint32_t>(h & mask));
    if (i + 1 < tokens.size()) {
      const std::uint64_t joined = fnv1a64(tokens[i + 1].text, fnv1a64(std::string_view("\0", 1), h));
      buckets.push_back(static_cast<std::uint32_t>(joined & mask));
    }
  }
  return finish(buckets, dim, tokens.size());
}

FeatureVector featurize_char_ngrams(std::span<const Token> tokens, std::uint32_t dim) {
  check_feature_dim(dim);
  std::vector<std::uint32_t> buckets;
  std::string wrapped;
  for (const auto& t : tokens) {
    wrapped.assign("<").append(t.text).append(">");
    const std::string_view w(wrapped);
    for (std::size_t n = 3; n <= 5; ++n)
      for (std::size_t i = 0; i + n <= w.size(); ++i) buckets.push_back(feature_bucket(w.substr(i, n), dim));
  }
  return finish(buckets, dim, buckets.size());
}

}  // namespace enstack
