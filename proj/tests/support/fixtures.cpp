#include "fixtures.hpp"

#include <enstack/rng.hpp>

#include <atomic>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

namespace enstack::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("enstack_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

ProbTable noisy_probs(const Corpus& corpus, const std::string& model, double hit, std::uint64_t seed) {
  SplitMix64 rng(seed);
  ProbTable table(model);
  for (const auto& s : corpus) {
    const Label truth = s.label.value_or(0);
    const auto peak = rng.uniform() < hit ? truth : static_cast<Label>(rng.below(kNumClasses));
    ProbVector p{};
    double total = 0;
    for (int c = 0; c < kNumClasses; ++c) total += p[c] = 0.05 + 0.3 * rng.uniform() + (c == peak ? 1.0 : 0.0);
    for (auto& v : p) v /= total;
    table.insert(s.id, p);
  }
  return table;
}

void write_probs_file(const ProbTable& table, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_probs(table, out);
}

void write_corpus_file(const Corpus& corpus, const fs::path& path) { write_jsonl(corpus, path); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace enstack::testing
