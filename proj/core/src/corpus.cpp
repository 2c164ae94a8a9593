#include "enstack/corpus.hpp"

#include "enstack/error.hpp"
#include "enstack/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace enstack {

std::string_view cwe_name(Label label) {
  switch (label) {
    case 0: return "CWE-119 (Memory)";
    case 1: return "CWE-120 (Buffer Overflow)";
    case 2: return "CWE-469 (Integer Overflow)";
    case 3: return "CWE-476 (Null Pointer)";
    case 4: return "CWE-other";
  }
  return "unknown";
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::Jsonl;
  if (name == "csv") return CorpusFormat::Csv;
  throw ValidationError("unknown corpus format '" + std::string(name) + "' (expected jsonl or csv)");
}

std::string_view to_string(CorpusFormat format) {
  return format == CorpusFormat::Jsonl ? "jsonl" : "csv";
}

std::size_t ClassDistribution::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

Corpus::Corpus(std::vector<CodeSample> samples, std::string provenance)
    : samples_(std::move(samples)), provenance_(std::move(provenance)) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(samples_.size());
  for (const auto& s : samples_) {
    if (!seen.insert(s.id).second) throw ValidationError("duplicate sample id '" + s.id + "'");
    if (s.label && !valid_label(*s.label))
      throw ValidationError("sample '" + s.id + "' has label " + std::to_string(*s.label) +
                            " outside 0..4");
  }
}

ClassDistribution Corpus::distribution() const {
  ClassDistribution d;
  for (const auto& s : samples_)
    if (s.label) ++d.counts[static_cast<std::size_t>(*s.label)];
  return d;
}

std::vector<std::string> Corpus::ids() const {
  std::vector<std::string> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.id);
  return out;
}

Corpus Corpus::sorted_by_id() const {
  Corpus out = *this;
  std::sort(out.samples_.begin(), out.samples_.end(),
            [](const CodeSample& a, const CodeSample& b) { return a.id < b.id; });
  return out;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

struct RecordBuilder {
  std::vector<CodeSample> samples;
  std::unordered_set<std::string> ids;

  void add(CodeSample s, std::size_t line) {
    if (s.label && !valid_label(*s.label))
      throw FormatError("rejected record '" + s.id + "': label " + std::to_string(*s.label) +
                            " outside 0..4",
                        line);
    if (!ids.insert(s.id).second) throw FormatError("duplicate id '" + s.id + "'", line);
    samples.push_back(std::move(s));
  }
};

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::optional<Label> parse_json_label(const nlohmann::json& v, std::size_t line) {
  if (v.is_null()) return std::nullopt;
  if (v.is_number_integer()) {
    const auto raw = v.get<long long>();
    // Out-of-range values are rejected by the caller with the record id.
    if (raw < -1000000 || raw > 1000000) return 1000000;
    return static_cast<Label>(raw);
  }
  throw FormatError("field 'label' must be an integer", line);
}

Corpus parse_jsonl(std::istream& in, std::string provenance) {
  RecordBuilder b;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (blank(text)) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("malformed JSON record: ") + e.what(), line);
    }
    if (!rec.is_object()) throw FormatError("record is not a JSON object", line);
    for (const char* key : {"id", "code", "label"})
      if (!rec.contains(key)) throw FormatError(std::string("missing field '") + key + "'", line);
    CodeSample s;
    if (rec["id"].is_string())
      s.id = rec["id"].get<std::string>();
    else if (rec["id"].is_number_integer())
      s.id = std::to_string(rec["id"].get<long long>());
    else
      throw FormatError("field 'id' must be a string", line);
    if (rec["code"].is_string())
      s.code = rec["code"].get<std::string>();
    else if (!rec["code"].is_null())
      throw FormatError("field 'code' must be a string", line);
    s.label = parse_json_label(rec["label"], line);
    b.add(std::move(s), line);
  }
  return Corpus(std::move(b.samples), std::move(provenance));
}

// RFC 4180 reader. Each record carries the line on which it starts.
class CsvReader {
 public:
  explicit CsvReader(std::string text) : text_(std::move(text)) {}

  bool next(std::vector<std::string>& fields, std::size_t& start_line) {
    fields.clear();
    if (pos_ >= text_.size()) return false;
    start_line = line_;
    std::string field;
    for (;;) {
      if (pos_ < text_.size() && text_[pos_] == '"') {
        ++pos_;
        for (;;) {
          if (pos_ >= text_.size()) throw FormatError("unterminated quoted field", start_line);
          const char c = text_[pos_++];
          if (c == '"') {
            if (pos_ < text_.size() && text_[pos_] == '"') {
              field.push_back('"');
              ++pos_;
            } else {
              break;
            }
          } else {
            if (c == '\n') ++line_;
            field.push_back(c);
          }
        }
        if (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '\n' && text_[pos_] != '\r')
          throw FormatError("unexpected character after closing quote", line_);
      } else {
        while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '\n' &&
               text_[pos_] != '\r') {
          if (text_[pos_] == '"') throw FormatError("quote inside unquoted field", line_);
          field.push_back(text_[pos_++]);
        }
      }
      fields.push_back(std::move(field));
      field.clear();
      if (pos_ >= text_.size()) return true;
      const char sep = text_[pos_++];
      if (sep == ',') continue;
      if (sep == '\r' && pos_ < text_.size() && text_[pos_] == '\n') ++pos_;
      ++line_;
      return true;
    }
  }

 private:
  std::string text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

Corpus parse_csv(std::istream& in, std::string provenance) {
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);
  CsvReader reader(std::move(text));
  RecordBuilder b;
  std::vector<std::string> fields;
  std::size_t line = 0;
  if (!reader.next(fields, line)) return Corpus({}, std::move(provenance));
  if (fields != std::vector<std::string>{"id", "code", "label"})
    throw FormatError("CSV header must be exactly 'id,code,label'", line);
  while (reader.next(fields, line)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != 3)
      throw FormatError("expected 3 fields, found " + std::to_string(fields.size()), line);
    CodeSample s{std::move(fields[0]), std::move(fields[1]), std::nullopt};
    if (s.id.empty()) throw FormatError("empty id", line);
    const std::string& raw = fields[2];
    if (!blank(raw)) {
      long long v = 0;
      const auto* first = raw.data();
      const auto* last = raw.data() + raw.size();
      const auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc{} || res.ptr != last)
        throw FormatError("label '" + raw + "' is not an integer", line);
      s.label = static_cast<Label>(std::clamp(v, -1LL, 1000000LL));
    }
    b.add(std::move(s), line);
  }
  return Corpus(std::move(b.samples), std::move(provenance));
}

}  // namespace

Corpus parse_corpus(std::istream& in, CorpusFormat format, std::string provenance) {
  return format == CorpusFormat::Jsonl ? parse_jsonl(in, std::move(provenance))
                                       : parse_csv(in, std::move(provenance));
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw NotFoundError("corpus not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("corpus not readable: " + path.string());
  return parse_corpus(in, format, path.string() + " [" + std::string(to_string(format)) + "]");
}

void write_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& s : corpus) {
    nlohmann::json rec{{"id", s.id}, {"code", s.code}};
    rec["label"] = s.label ? nlohmann::json(*s.label) : nlohmann::json(nullptr);
    out << rec.dump() << '\n';
  }
}

void write_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_jsonl(corpus, out);
}

// ---------------------------------------------------------------------------
// Cleaning, splitting, downsampling

Corpus clean(const Corpus& corpus) {
  std::vector<CodeSample> kept;
  kept.reserve(corpus.size());
  for (const auto& s : corpus)
    if (s.label && !blank(s.code)) kept.push_back(s);
  return Corpus(std::move(kept), corpus.provenance());
}

namespace {

// Positions of each class's samples, ordered by id.
std::array<std::vector<std::size_t>, kNumClasses> class_members_by_id(const Corpus& corpus) {
  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& label = corpus[i].label;
    if (!label) throw ValidationError("sample '" + corpus[i].id + "' has no label; clean the corpus first");
    members[static_cast<std::size_t>(*label)].push_back(i);
  }
  for (auto& m : members)
    std::sort(m.begin(), m.end(),
              [&](std::size_t a, std::size_t b) { return corpus[a].id < corpus[b].id; });
  return members;
}

Corpus pick(const Corpus& corpus, std::vector<std::size_t> positions, const std::string& tag) {
  std::sort(positions.begin(), positions.end(),
            [&](std::size_t a, std::size_t b) { return corpus[a].id < corpus[b].id; });
  std::vector<CodeSample> out;
  out.reserve(positions.size());
  for (auto p : positions) out.push_back(corpus[p]);
  return Corpus(std::move(out), corpus.provenance() + tag);
}

// Largest-remainder apportionment of n items over the given weights.
std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = ratios[k] * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    remainders[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++counts[order[r % 3]];
  while (assigned > n) {  // floating excess; take from the smallest remainder
    for (auto it = order.rbegin(); it != order.rend() && assigned > n; ++it)
      if (counts[*it] > 0) --counts[*it], --assigned;
  }
  return counts;
}

}  // namespace

SplitSet stratified_split(const Corpus& corpus, SplitRatios ratios, std::uint64_t seed) {
  const std::array<double, 3> r{ratios.train, ratios.validation, ratios.test};
  for (double v : r)
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("split ratios must be positive");
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");

  auto members = class_members_by_id(corpus);
  std::array<std::vector<std::size_t>, 3> parts;
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& m = members[c];
    if (m.empty()) continue;
    if (m.size() < 3)
      throw StratificationError("class " + std::to_string(c) + " has " + std::to_string(m.size()) +
                                " sample(s); stratified three-way split needs at least 3");
    SplitMix64 rng(derive_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(m));
    const auto counts = apportion(m.size(), r);
    std::size_t at = 0;
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t i = 0; i < counts[k]; ++i) parts[k].push_back(m[at++]);
  }
  SplitSet out;
  out.train = pick(corpus, std::move(parts[0]), " #train");
  out.validation = pick(corpus, std::move(parts[1]), " #validation");
  out.test = pick(corpus, std::move(parts[2]), " #test");
  out.seed = seed;
  out.ratios = ratios;
  return out;
}

nlohmann::json split_manifest(const SplitSet& split) {
  return {{"seed", split.seed},
          {"ratios", {split.ratios.train, split.ratios.validation, split.ratios.test}},
          {"members",
           {{"train", split.train.ids()},
            {"validation", split.validation.ids()},
            {"test", split.test.ids()}}}};
}

Corpus downsample(const Corpus& corpus, const ClassCaps& caps, std::uint64_t seed) {
  for (std::size_t c = 0; c < caps.size(); ++c)
    if (caps[c] < 1) throw ValidationError("cap for class " + std::to_string(c) + " must be >= 1");
  auto members = class_members_by_id(corpus);
  std::vector<bool> keep(corpus.size(), false);
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& m = members[c];
    if (m.size() > caps[c]) {
      SplitMix64 rng(derive_seed(seed, 0x100 + c));
      rng.shuffle(std::span<std::size_t>(m));
      m.resize(caps[c]);
    }
    for (auto p : m) keep[p] = true;
  }
  std::vector<CodeSample> out;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (keep[i]) out.push_back(corpus[i]);
  return Corpus(std::move(out), corpus.provenance());
}

}  // namespace enstack
