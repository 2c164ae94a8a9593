#include "synthetic.hpp"

#include <enstack/rng.hpp>

#include <algorithm>
#include <cstdio>
#include <vector>

namespace enstack::testing {

namespace {

std::string id_for(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06zu", i);
  return buf;
}

std::string digits(SplitMix64& rng) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%04u", static_cast<unsigned>(rng.below(10000)));
  return buf;
}

/// Two distinct labels, both different from `y`.
std::pair<Label, Label> two_wrong(Label y, SplitMix64& rng) {
  std::vector<Label> others;
  for (Label c = 0; c < kNumClasses; ++c)
    if (c != y) others.push_back(c);
  rng.shuffle(std::span(others));
  return {others[0], others[1]};
}

}  // namespace

Corpus marker_corpus(std::size_t n, std::uint64_t seed) {
  static constexpr std::array<std::string_view, 5> kMarkers{"memcpy_overflow", "strcpy_unbounded", "ptr_arith_scale",
                                                            "null_deref_path", "misc_weakness"};
  static constexpr std::array<std::string_view, 6> kFiller{"buf", "len", "idx", "tmp", "ret", "ctx"};
  SplitMix64 rng(seed);
  std::vector<CodeSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<Label>(i % kNumClasses);
    std::string code = "int f(char *buf, int len) {\n";
    const auto lines = 3 + rng.below(4);
    const auto marker_at = rng.below(lines);
    for (std::uint64_t l = 0; l < lines; ++l) {
      if (l == marker_at) code += "  " + std::string(kMarkers[static_cast<std::size_t>(y)]) + "(buf, len);\n";
      code += "  " + std::string(kFiller[rng.below(kFiller.size())]) + " = " +
              std::string(kFiller[rng.below(kFiller.size())]) + " + " + std::to_string(rng.below(100)) + ";\n";
    }
    code += "  return 0;\n}\n";
    out.push_back({id_for(i), std::move(code), y});
  }
  return Corpus(std::move(out), "synthetic:marker");
}

Corpus complementary_corpus(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<CodeSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<Label>(i % kNumClasses);
    const auto draw = rng.below(10);
    const Regime regime = draw < 4 ? Regime::Both : draw < 7 ? Regime::TokenOnly : Regime::CharOnly;

    std::vector<Label> anchored{y};
    std::vector<Label> infixes{y};
    if (regime == Regime::CharOnly) {
      auto [a, b] = two_wrong(y, rng);
      anchored = {a, b};
    } else if (regime == Regime::TokenOnly) {
      auto [a, b] = two_wrong(y, rng);
      infixes = {a, b};
    }

    std::string params;
    for (std::size_t k = 0; k < infixes.size(); ++k) {
      const std::string ident = "v" + digits(rng) + std::string(kInfixes[static_cast<std::size_t>(infixes[k])]) + digits(rng);
      params += (k ? ", int " : "int ") + ident;
    }
    std::string body;
    for (Label l : anchored) body += "  anchor lane" + std::to_string(l) + ";\n";
    std::vector<Label> rest;
    for (Label c = 0; c < kNumClasses; ++c)
      if (std::find(anchored.begin(), anchored.end(), c) == anchored.end()) rest.push_back(c);
    rng.shuffle(std::span(rest));
    for (Label l : rest) body += "  lane" + std::to_string(l) + ";\n";
    out.push_back({id_for(i), "int f(" + params + ") {\n" + body + "  return 0;\n}\n", y});
  }
  return Corpus(std::move(out), "synthetic:complementary");
}

CueReading read_cues(std::string_view code) {
  CueReading r;
  auto& anchored = r.token;
  for (std::size_t pos = 0; (pos = code.find("anchor lane", pos)) != std::string_view::npos; pos += 11)
    anchored.push_back(code[pos + 11] - '0');
  const auto params = code.substr(0, code.find(')'));
  auto& infixes = r.chars;
  for (std::size_t pos = 0; (pos = params.find('v', pos)) != std::string_view::npos; ++pos) {
    if (pos + 14 > params.size()) break;
    for (Label c = 0; c < kNumClasses; ++c)
      if (params.substr(pos + 5, 5) == kInfixes[static_cast<std::size_t>(c)]) infixes.push_back(c);
  }
  return r;
}

}  // namespace enstack::testing
