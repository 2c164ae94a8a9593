#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "enstack/corpus.hpp"
#include "enstack/matrix.hpp"

namespace enstack::metrics {

/// counts[true][predicted].
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  std::size_t total() const noexcept;
  std::size_t support(Label cls) const noexcept;  // row sum
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Throws ValidationError on a length mismatch, empty input or out-of-range label.
ConfusionMatrix confusion_matrix(std::span<const Label> y_true, std::span<const Label> y_pred);

/// Percentages. Precision, recall and F1 are averaged with true-class support
/// as weights, so recall equals accuracy.
struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::array<double, kNumClasses> class_precision{};
  std::array<double, kNumClasses> class_recall{};
  std::array<double, kNumClasses> class_f1{};
  /// Zero-division events (a supported class that is never predicted).
  std::vector<std::string> warnings;
};

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

enum class AucAverage { Macro, Weighted };

/// Binary ROC AUC via the Mann-Whitney rank statistic; tied scores share
/// their average rank (half credit). Needs at least one positive and one negative.
double binary_auc(std::span<const double> scores, std::span<const bool> positive);

/// One-vs-rest AUC in percent. Each class needs positives and negatives;
/// with `allow_missing` such classes are skipped (noted in `warnings`) and the
/// average is taken over the rest.
double auc_ovr(std::span<const Label> y_true, const Matrix& scores, AucAverage average, bool allow_missing = false,
               std::vector<std::string>* warnings = nullptr);

struct EvalReport {
  std::string model;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc_macro = 0.0;
  double auc_weighted = 0.0;
  ConfusionMatrix confusion;
  std::vector<std::string> warnings;

  bool operator==(const EvalReport&) const = default;
};

/// Predictions are argmax rows of `probs` (ties to the smallest class).
EvalReport evaluate(std::span<const Label> y_true, const Matrix& probs, std::string model = {},
                    bool allow_missing = false);

/// Accuracy, precision, recall, F1, AUC (macro or weighted).
double metric_value(const EvalReport& report, std::string_view metric);

/// Two decimals, ties to even: 78.125 -> "78.12".
std::string format_percent(double value);

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

}  // namespace enstack::metrics
