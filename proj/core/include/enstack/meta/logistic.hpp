#pragma once

#include <array>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "enstack/meta/common.hpp"

namespace enstack::meta {

struct LogisticParams {
  double C = 1.0;
  int max_iter = 200;
  double tol = 1e-4;  // gradient-norm stopping threshold
};

/// Binary problem for one class: minimise 0.5 |w|^2 + C sum log(1 + exp(-y w.x)),
/// where x carries a trailing constant 1 so the intercept is regularised too.
struct LogisticClass {
  bool present = false;
  std::vector<double> w;  // cols + 1 entries, intercept last
  int iterations = 0;
  double grad_norm = 0.0;
  bool hit_cap = false;
};

/// One-vs-rest L2 logistic regression solved by Newton's method with
/// backtracking. Class probabilities are the per-class sigmoids normalised
/// over the classes seen in training.
class LogisticModel {
 public:
  static LogisticModel fit(const Matrix& x, std::span<const Label> y, const LogisticParams& params = {});
  /// All five classes present with zero weights.
  static LogisticModel zeros(std::size_t cols, const LogisticParams& params = {});

  Matrix predict_proba(const Matrix& x) const;
  double decision(std::size_t cls, std::span<const double> row) const;

  std::size_t cols() const noexcept { return cols_; }
  const LogisticParams& params() const noexcept { return params_; }
  const std::array<LogisticClass, kNumClasses>& classes() const noexcept { return classes_; }

  nlohmann::json to_json() const;
  static LogisticModel from_json(const nlohmann::json& j);

 private:
  LogisticParams params_;
  std::size_t cols_ = 0;
  std::array<LogisticClass, kNumClasses> classes_{};
};

}  // namespace enstack::meta
