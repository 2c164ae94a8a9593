#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace enstack {

inline constexpr int kNumClasses = 5;

/// Class label 0..4: CWE-119, CWE-120, CWE-469, CWE-476, CWE-other.
using Label = int;

constexpr bool valid_label(long long v) noexcept { return v >= 0 && v < kNumClasses; }

/// CWE name for a class label, e.g. "CWE-476 (Null Pointer)".
std::string_view cwe_name(Label label);

/// One labeled function body. A missing label (JSON null / empty CSV cell)
/// marks a null entry that `clean` removes.
struct CodeSample {
  std::string id;
  std::string code;
  std::optional<Label> label;

  bool operator==(const CodeSample&) const = default;
};

enum class CorpusFormat { Jsonl, Csv };

CorpusFormat parse_corpus_format(std::string_view name);
std::string_view to_string(CorpusFormat format);

struct ClassDistribution {
  std::array<std::size_t, kNumClasses> counts{};

  std::size_t total() const noexcept;
  bool operator==(const ClassDistribution&) const = default;
};

/// Ordered, id-unique list of samples plus where it came from.
class Corpus {
 public:
  Corpus() = default;
  /// Throws ValidationError on a duplicate id or an out-of-range label.
  explicit Corpus(std::vector<CodeSample> samples, std::string provenance = {});

  const std::vector<CodeSample>& samples() const noexcept { return samples_; }
  const std::string& provenance() const noexcept { return provenance_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  auto begin() const noexcept { return samples_.begin(); }
  auto end() const noexcept { return samples_.end(); }
  const CodeSample& operator[](std::size_t i) const { return samples_[i]; }

  /// Per-class counts over labeled samples.
  ClassDistribution distribution() const;
  std::vector<std::string> ids() const;
  /// Same samples ordered by id (byte-wise).
  Corpus sorted_by_id() const;

 private:
  std::vector<CodeSample> samples_;
  std::string provenance_;
};

/// Reads a JSONL (`{"id","code","label"}` per line) or CSV (`id,code,label`
/// header, RFC-4180 quoting) corpus. Errors name the offending line.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
Corpus parse_corpus(std::istream& in, CorpusFormat format, std::string provenance = {});

void write_jsonl(const Corpus& corpus, std::ostream& out);
void write_jsonl(const Corpus& corpus, const std::filesystem::path& path);

/// Drops null entries: whitespace-only code or missing label. Order is kept.
Corpus clean(const Corpus& corpus);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct SplitSet {
  Corpus train;
  Corpus validation;
  Corpus test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

/// Per-class stratified three-way split. Members are id-sorted; each class
/// is allocated by largest remainder so every member count is within one of
/// ratio x class count. Depends only on the id set, never on input order.
SplitSet stratified_split(const Corpus& corpus, SplitRatios ratios, std::uint64_t seed);

/// `{seed, ratios, members: {train, validation, test}}`.
nlohmann::json split_manifest(const SplitSet& split);

using ClassCaps = std::array<std::size_t, kNumClasses>;

inline constexpr std::size_t kNoCap = static_cast<std::size_t>(-1);
inline constexpr ClassCaps kUncapped{kNoCap, kNoCap, kNoCap, kNoCap, kNoCap};

/// Keeps min(count, cap) samples per class, drawn uniformly without
/// replacement. Survivors keep their relative order.
Corpus downsample(const Corpus& corpus, const ClassCaps& caps, std::uint64_t seed);

}  // namespace enstack
