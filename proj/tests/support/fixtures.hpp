#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <enstack/base_model.hpp>
#include <enstack/corpus.hpp>

namespace enstack::testing {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// A probability table for every sample of `corpus` whose peak sits on the
/// true label with probability `hit` and on a random class otherwise.
ProbTable noisy_probs(const Corpus& corpus, const std::string& model, double hit, std::uint64_t seed);

void write_probs_file(const ProbTable& table, const std::filesystem::path& path);
void write_corpus_file(const Corpus& corpus, const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);

}  // namespace enstack::testing
