#pragma once

#include <array>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "enstack/meta/common.hpp"

namespace enstack::meta {

struct BoostParams {
  int n_estimators = 100;
  double learning_rate = 0.1;
  int max_depth = 6;
  double lambda = 1.0;            // L2 on leaf weights
  double min_child_weight = 1.0;  // minimum hessian sum per child
};

/// Leaf when feature < 0; `value` already includes the learning rate.
struct RegNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegTree {
  std::vector<RegNode> nodes;

  double predict(std::span<const double> row) const;
  int depth() const;
};

/// Softmax gradient boosting. Scores start at log class priors; every round
/// fits one exact-greedy regression tree per present class to the gradient
/// p - 1{y = c} with hessian p (1 - p), leaf weight -G / (H + lambda).
class BoostModel {
 public:
  static BoostModel fit(const Matrix& x, std::span<const Label> y, const BoostParams& params = {});

  Matrix raw_scores(const Matrix& x) const;
  Matrix predict_proba(const Matrix& x) const;

  std::size_t cols() const noexcept { return cols_; }
  const BoostParams& params() const noexcept { return params_; }
  const ClassMask& present() const noexcept { return present_; }
  /// rounds()[r][c]; empty trees for absent classes.
  const std::vector<std::array<RegTree, kNumClasses>>& rounds() const noexcept { return rounds_; }
  /// Training multiclass log-loss before the first round and after each round.
  const std::vector<double>& loss_history() const noexcept { return loss_history_; }

  nlohmann::json to_json() const;
  static BoostModel from_json(const nlohmann::json& j);

 private:
  BoostParams params_;
  std::size_t cols_ = 0;
  ClassMask present_{};
  std::array<double, kNumClasses> init_score_{};
  std::vector<std::array<RegTree, kNumClasses>> rounds_;
  std::vector<double> loss_history_;
};

}  // namespace enstack::meta
