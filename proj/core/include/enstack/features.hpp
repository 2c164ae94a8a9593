#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "enstack/tokenizer.hpp"

namespace enstack {

/// Sparse vector over `dim` hashed buckets; entries sorted by index, indices unique.
struct FeatureVector {
  std::uint32_t dim = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool empty() const noexcept { return entries.empty(); }
  bool operator==(const FeatureVector&) const = default;
};

inline constexpr std::uint32_t kMinFeatureDim = 1u << 10;

/// Throws ValidationError unless dim is a power of two >= 2^10.
void check_feature_dim(std::uint32_t dim);

/// Bucket of a byte string: FNV-1a 64 masked to dim - 1.
std::uint32_t feature_bucket(std::string_view bytes, std::uint32_t dim);

/// Token unigrams and bigrams. A unigram hashes its lexeme bytes; a bigram
/// hashes first lexeme, one 0x00 byte, second lexeme. Counts are scaled by
/// 1/sqrt(number of tokens).
FeatureVector featurize(std::span<const Token> tokens, std::uint32_t dim);

/// Character 3-, 4- and 5-grams inside each lexeme wrapped as '<' lexeme '>'.
/// Counts are scaled by 1/sqrt(number of n-grams).
FeatureVector featurize_char_ngrams(std::span<const Token> tokens, std::uint32_t dim);

}  // namespace enstack
