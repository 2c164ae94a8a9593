#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "enstack/corpus.hpp"
#include "enstack/features.hpp"

namespace enstack {

/// Distribution over the five classes: non-negative, sums to 1 within 1e-6.
using ProbVector = std::array<double, kNumClasses>;

/// Index of the largest entry; ties go to the smallest index.
Label argmax(std::span<const double> probs);

/// Probabilities from one model, keyed by sample id.
class ProbTable {
 public:
  ProbTable() = default;
  explicit ProbTable(std::string model) : model_(std::move(model)) {}

  const std::string& model() const noexcept { return model_; }
  std::size_t size() const noexcept { return order_.size(); }
  const std::vector<std::string>& ids() const noexcept { return order_; }

  /// Throws FormatError on a duplicate id or an invalid vector.
  void insert(std::string id, const ProbVector& probs);
  const ProbVector* find(std::string_view id) const;
  /// Merges another table's rows (ids must not overlap).
  void merge(const ProbTable& other);

 private:
  std::string model_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, ProbVector> rows_;
};

inline constexpr double kRenormTolerance = 1e-3;

/// Reads the probability wire format: a header line `{"model": name,
/// "classes": 5}` followed by `{"id": .., "probs": [p0..p4]}` rows. Rows whose
/// sum is within 1e-3 of 1 are renormalized; anything else is rejected.
ProbTable load_external_probs(const std::filesystem::path& path);
ProbTable parse_external_probs(std::istream& in);

/// Writes the same format with 17 significant digits per probability.
void write_probs(const ProbTable& table, std::ostream& out);

enum class BaseKind { HashedTokenSoftmax, CharNgramSoftmax, External };

BaseKind parse_base_kind(std::string_view name);
std::string_view to_string(BaseKind kind);

struct SoftmaxTrainConfig {
  std::uint32_t dim = 1u << 14;
  int epochs = 200;
  /// Initial step of each epoch's backtracking line search.
  double learning_rate = 0.5;
  double l2 = 1e-4;
  /// Recorded for provenance. Full-batch descent from zero weights uses no randomness.
  std::uint64_t seed = 0;
};

/// Linear softmax over hashed features. Weights are class-major: w[c * dim + j].
struct SoftmaxWeights {
  std::uint32_t dim = 0;
  std::vector<double> weights;
  std::array<double, kNumClasses> bias{};
  /// Training cross-entropy before the first epoch and after each epoch.
  std::vector<double> loss_history;
  /// Cross-entropy plus the L2 term, same indexing.
  std::vector<double> objective_history;
};

struct BaseModel {
  std::string name;
  BaseKind kind = BaseKind::HashedTokenSoftmax;
  std::variant<SoftmaxWeights, std::shared_ptr<const ProbTable>> params;
};

/// Feature vector the given built-in kind sees for a code string.
FeatureVector featurize_code(BaseKind kind, std::string_view code, std::uint32_t dim);

/// Softmax regression by full-batch gradient descent on cross-entropy + L2/2
/// |W|^2. Each epoch backtracks from `learning_rate` until neither the
/// objective nor the cross-entropy increases, so both histories are
/// non-increasing. Throws DegenerateError when fewer than two classes occur.
BaseModel train_builtin(BaseKind kind, const Corpus& train, const SoftmaxTrainConfig& config,
                        std::string name);

/// Built-in model with all-zero parameters (uniform predictions).
BaseModel untrained_builtin(BaseKind kind, std::uint32_t dim, std::string name);

BaseModel external_model(std::string name, std::shared_ptr<const ProbTable> table);

/// Throws CoverageError if an external table has no row for the sample id.
ProbVector predict_proba_base(const BaseModel& model, const CodeSample& sample);

/// Scores every sample of a corpus into a table named after the model.
ProbTable score_corpus(const BaseModel& model, const Corpus& corpus);

}  // namespace enstack
