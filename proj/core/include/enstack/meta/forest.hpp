#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "enstack/meta/common.hpp"

namespace enstack::meta {

struct ForestParams {
  int n_estimators = 200;
  int max_depth = 10;
  std::uint64_t seed = 42;
};

/// Leaf when feature < 0. Samples with x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<double, kNumClasses> distribution{};  // leaves only
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf(std::span<const double> row) const;
  int depth() const;
};

/// Bagged Gini trees. Each tree draws its bootstrap and per-split feature
/// subsets (ceil(sqrt(d)) non-constant features) from its own stream
/// derive_seed(seed, tree index). Probabilities average the leaf class
/// distributions.
class ForestModel {
 public:
  static ForestModel fit(const Matrix& x, std::span<const Label> y, const ForestParams& params = {});

  Matrix predict_proba(const Matrix& x) const;

  std::size_t cols() const noexcept { return cols_; }
  const ForestParams& params() const noexcept { return params_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

  nlohmann::json to_json() const;
  static ForestModel from_json(const nlohmann::json& j);

 private:
  ForestParams params_;
  std::size_t cols_ = 0;
  std::vector<DecisionTree> trees_;
};

}  // namespace enstack::meta
