#include "enstack/metrics.hpp"

#include "enstack/base_model.hpp"
#include "enstack/error.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace enstack::metrics {

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t t = 0;
  for (const auto& row : counts) t += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return t;
}

std::size_t ConfusionMatrix::support(Label cls) const noexcept {
  const auto& row = counts[static_cast<std::size_t>(cls)];
  return std::accumulate(row.begin(), row.end(), std::size_t{0});
}

ConfusionMatrix confusion_matrix(std::span<const Label> y_true, std::span<const Label> y_pred) {
  if (y_true.size() != y_pred.size())
    throw ValidationError("y_true and y_pred differ in length (" + std::to_string(y_true.size()) + " vs " +
                          std::to_string(y_pred.size()) + ")");
  if (y_true.empty()) throw ValidationError("cannot build a confusion matrix from zero samples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (!valid_label(y_true[i]) || !valid_label(y_pred[i]))
      throw ValidationError("label outside 0..4 at position " + std::to_string(i));
    ++cm.counts[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])];
  }
  return cm;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw ValidationError("confusion matrix is empty");
  ClassificationMetrics m;
  std::size_t trace = 0;
  double weighted_p = 0.0, weighted_f1 = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::size_t tp = cm.counts[c][c];
    std::size_t predicted = 0;
    for (std::size_t t = 0; t < kNumClasses; ++t) predicted += cm.counts[t][c];
    const std::size_t support = cm.support(static_cast<Label>(c));
    trace += tp;
    const double p = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    const double r = support ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    const double f = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    if (support && !predicted)
      m.warnings.push_back("precision undefined for class " + std::to_string(c) + " (never predicted); set to 0");
    m.class_precision[c] = 100.0 * p;
    m.class_recall[c] = 100.0 * r;
    m.class_f1[c] = 100.0 * f;
    weighted_p += static_cast<double>(support) * p;
    weighted_f1 += static_cast<double>(support) * f;
  }
  const double n = static_cast<double>(total);
  m.accuracy = 100.0 * static_cast<double>(trace) / n;
  // sum_c support_c * (TP_c / support_c) / N is trace / N; evaluate it that way so it is exact.
  m.recall = 100.0 * static_cast<double>(trace) / n;
  m.precision = 100.0 * weighted_p / n;
  m.f1 = 100.0 * weighted_f1 / n;
  return m;
}

double binary_auc(std::span<const double> scores, std::span<const bool> positive) {
  const std::size_t n = scores.size();
  if (positive.size() != n) throw ValidationError("scores and labels differ in length");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (positive[order[k]]) rank_sum += avg_rank, n_pos += 1.0;
    i = j;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw ValidationError("AUC needs both positive and negative samples");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double auc_ovr(std::span<const Label> y_true, const Matrix& scores, AucAverage average, bool allow_missing,
               std::vector<std::string>* warnings) {
  if (scores.rows() != y_true.size() || scores.cols() != kNumClasses)
    throw DimensionError("score matrix must be n x 5 with n = number of labels");
  const std::size_t n = y_true.size();
  std::vector<double> column(n);
  std::unique_ptr<bool[]> positive(new bool[n]);
  double weighted_sum = 0.0, weight_total = 0.0, macro_sum = 0.0;
  std::size_t included = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t support = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!valid_label(y_true[i])) throw ValidationError("label outside 0..4 at position " + std::to_string(i));
      positive[i] = static_cast<std::size_t>(y_true[i]) == c;
      support += positive[i];
      column[i] = scores(i, c);
    }
    if (support == 0 || support == n) {
      const std::string what = "class " + std::to_string(c) + (support == 0 ? " has no positive samples" : " has no negative samples");
      if (!allow_missing) throw ValidationError("one-vs-rest AUC undefined: " + what);
      if (warnings) warnings->push_back("AUC excludes " + what);
      continue;
    }
    const double auc = binary_auc(column, std::span<const bool>(positive.get(), n));
    macro_sum += auc;
    weighted_sum += static_cast<double>(support) * auc;
    weight_total += static_cast<double>(support);
    ++included;
  }
  if (included == 0) throw ValidationError("one-vs-rest AUC undefined: no class has both positives and negatives");
  return 100.0 * (average == AucAverage::Macro ? macro_sum / static_cast<double>(included) : weighted_sum / weight_total);
}

EvalReport evaluate(std::span<const Label> y_true, const Matrix& probs, std::string model, bool allow_missing) {
  if (probs.rows() != y_true.size() || probs.cols() != kNumClasses)
    throw DimensionError("probability matrix must be n x 5 with n = number of labels");
  std::vector<Label> pred(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) pred[i] = argmax(probs.row(i));
  EvalReport r;
  r.model = std::move(model);
  r.confusion = confusion_matrix(y_true, pred);
  auto cm = classification_metrics(r.confusion);
  r.accuracy = cm.accuracy;
  r.precision = cm.precision;
  r.recall = cm.recall;
  r.f1 = cm.f1;
  r.warnings = std::move(cm.warnings);
  r.auc_macro = auc_ovr(y_true, probs, AucAverage::Macro, allow_missing, &r.warnings);
  r.auc_weighted = auc_ovr(y_true, probs, AucAverage::Weighted, allow_missing, nullptr);
  return r;
}

double metric_value(const EvalReport& report, std::string_view metric) {
  if (metric == "accuracy") return report.accuracy;
  if (metric == "precision") return report.precision;
  if (metric == "recall") return report.recall;
  if (metric == "f1") return report.f1;
  if (metric == "auc" || metric == "auc_macro") return report.auc_macro;
  if (metric == "auc_weighted") return report.auc_weighted;
  throw ValidationError("unknown metric '" + std::string(metric) + "'");
}

std::string format_percent(double value) {
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double hundredths = std::nearbyint(value * 100.0);
  std::fesetround(saved);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", hundredths / 100.0);
  return buf;
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"model", r.model},
          {"accuracy", r.accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"auc_macro", r.auc_macro},
          {"auc_weighted", r.auc_weighted},
          {"averaging", "weighted"},
          {"confusion", r.confusion.counts},
          {"warnings", r.warnings}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.model = j.at("model").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.auc_macro = j.at("auc_macro").get<double>();
    r.auc_weighted = j.at("auc_weighted").get<double>();
    r.confusion.counts = j.at("confusion").get<decltype(r.confusion.counts)>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed evaluation report: ") + e.what());
  }
}

}  // namespace enstack::metrics
