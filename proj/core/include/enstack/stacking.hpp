#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "enstack/base_model.hpp"
#include "enstack/corpus.hpp"
#include "enstack/error.hpp"
#include "enstack/matrix.hpp"
#include "enstack/meta/meta_model.hpp"
#include "enstack/metrics.hpp"

namespace enstack {

/// Meta-features for one corpus: row i is the concatenation of every base
/// model's probability vector for sample i, in `model_order`.
struct MetaDataset {
  Matrix z;
  /// Empty when built without labels.
  std::vector<Label> y;
  std::vector<std::string> ids;
  std::vector<std::string> model_order;

  /// The same rows restricted to a subset of the models (kept in model_order).
  MetaDataset subset(std::span<const std::string> names) const;
};

/// Throws CoverageError listing every id an external table is missing.
/// With `with_labels` false the corpus labels are never touched.
MetaDataset build_meta_features(std::span<const BaseModel> models, const Corpus& corpus, bool with_labels = true);

/// Records who read which split's labels, in order. The pipeline routes
/// every label read through it so tests can check that test labels are only
/// read when the final evaluation runs.
class LabelAudit {
 public:
  struct Event {
    std::string split;
    std::string stage;
  };

  void record(std::string split, std::string stage);
  std::vector<Event> events() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Event> events_;
};

/// A pipeline failure tagged with the stage it happened in.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& message)
      : Error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct BuiltinSpec {
  BaseKind kind = BaseKind::HashedTokenSoftmax;
  SoftmaxTrainConfig train;
};

struct ExternalSpec {
  /// One file, or several whose rows are merged (e.g. one per split).
  std::vector<std::filesystem::path> probs;
};

struct BaseModelSpec {
  std::string name;
  std::variant<BuiltinSpec, ExternalSpec> source;
};

struct CorpusSource {
  std::filesystem::path path;
  CorpusFormat format = CorpusFormat::Jsonl;
};

struct PreparedSplits {
  std::filesystem::path train;
  std::filesystem::path validation;
  std::filesystem::path test;
};

struct PipelineSeeds {
  std::uint64_t split = 0;
  std::uint64_t downsample = 0;
  std::uint64_t cv = 0;
};

struct PipelineConfig {
  std::variant<CorpusSource, PreparedSplits> data;
  SplitRatios ratios;
  /// Applied to the training split only.
  ClassCaps caps = kUncapped;
  PipelineSeeds seeds;
  std::vector<BaseModelSpec> base_models;
  std::vector<meta::MetaKind> meta_kinds{meta::kAllMetaKinds.begin(), meta::kAllMetaKinds.end()};
  /// Base-model subsets to stack. Empty means the full set only.
  std::vector<std::vector<std::string>> subsets;
  std::string selection_metric = "accuracy";
  int cv_folds = 5;
  meta::MetaParams meta_params;
  /// Worker threads for independent cells; 0 picks the hardware count.
  unsigned threads = 0;

  /// Throws ValidationError on an inconsistent config.
  void validate() const;
};

/// Reads a config document; relative paths resolve against `base_dir`.
/// `"ablation": true` expands to every single base model plus the full set.
PipelineConfig parse_pipeline_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Canonical form with absolute paths. `threads` is left out since it never
/// changes results; the config hash is FNV-1a over this document's dump.
nlohmann::json to_json(const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);

/// All singletons followed by the full set, in declaration order.
std::vector<std::vector<std::string>> ablation_subsets(std::span<const BaseModelSpec> models);

/// "C+G (LR)".
std::string row_key(std::span<const std::string> subset, meta::MetaKind kind);
/// "Stacking C (LR)" for one base model, "Ensemble Stacking C+G (LR)" otherwise.
std::string row_label(std::span<const std::string> subset, meta::MetaKind kind);

struct SelectionCandidate {
  meta::MetaKind kind = meta::MetaKind::LR;
  metrics::EvalReport validation;
};

/// Index of the candidate with the highest metric. Ties go to the earlier
/// kind in LR < RF < SVM < XGBoost order, then to the earlier candidate.
/// Throws ValidationError on an empty list or unknown metric.
std::size_t select_meta(std::span<const SelectionCandidate> candidates, std::string_view metric);

struct IndividualRow {
  std::string name;
  metrics::EvalReport validation;
  metrics::EvalReport test;
};

struct StackRow {
  std::string key;
  std::string label;
  std::vector<std::string> subset;
  meta::MetaKind kind = meta::MetaKind::LR;
  /// Out-of-fold cross-validation on the validation meta-dataset.
  std::optional<metrics::EvalReport> validation;
  /// The candidate refit on all validation rows, scored on test.
  std::optional<metrics::EvalReport> test;
  /// Set when fitting or scoring failed; the row is then not selectable.
  std::string error;
};

struct SubsetSelection {
  std::vector<std::string> subset;
  std::string selected_key;
};

struct PipelineResult {
  nlohmann::json config;
  std::string config_hash;
  PipelineSeeds seeds;
  std::string selection_metric;
  int cv_folds = 5;
  std::vector<std::string> model_order;
  std::map<std::string, std::string> input_digests;
  std::map<std::string, ClassDistribution> split_distributions;
  std::vector<IndividualRow> individual;
  std::vector<StackRow> rows;
  std::vector<SubsetSelection> selections;
  /// Winner for the largest subset.
  std::string selected;
  /// Fitted winner for `selected`.
  std::optional<meta::MetaModel> selected_model;

  /// Wall-clock seconds per stage. Not serialized: results stay byte-stable.
  std::vector<std::pair<std::string, double>> timings;

  bool empty() const noexcept { return individual.empty() && rows.empty(); }
};

struct PipelineOptions {
  LabelAudit* audit = nullptr;
};

/// Prepare data, train base models on train, build validation meta-features,
/// fit and select meta-classifiers per subset on validation, then score
/// every candidate on test. Throws PipelineError naming the stage.
PipelineResult run_pipeline(const PipelineConfig& config, const PipelineOptions& options = {});

/// run_pipeline over `subsets` (all singletons plus the full set when empty).
PipelineResult ablation_sweep(PipelineConfig config, const PipelineOptions& options = {});

nlohmann::json to_json(const PipelineResult& result);
/// Parses the serialized form (the fitted model is not stored there).
PipelineResult result_from_json(const nlohmann::json& j);

/// FNV-1a over the file bytes, as hex. Throws NotFoundError.
std::string file_digest(const std::filesystem::path& path);

}  // namespace enstack
