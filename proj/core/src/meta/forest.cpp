#include "enstack/meta/forest.hpp"

#include "enstack/error.hpp"
#include "enstack/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace enstack::meta {

const TreeNode& DecisionTree::leaf(std::span<const double> row) const {
  const TreeNode* node = &nodes.front();
  while (node->feature >= 0)
    node = &nodes[static_cast<std::size_t>(row[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left
                                                                                                            : node->right)];
  return *node;
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

namespace {

using Counts = std::array<double, kNumClasses>;

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const Label> y, std::vector<double> weight, int max_depth,
              std::uint64_t seed)
      : x_(x), y_(y), weight_(std::move(weight)), max_depth_(max_depth), rng_(seed),
        max_features_(static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols()))))) {}

  DecisionTree build() {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < weight_.size(); ++i)
      if (weight_[i] > 0.0) idx.push_back(i);
    grow(idx, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  Counts counts_of(std::span<const std::size_t> idx) const {
    Counts c{};
    for (auto i : idx) c[static_cast<std::size_t>(y_[i])] += weight_[i];
    return c;
  }

  static double weighted_gini(const Counts& c, double total) {
    if (total <= 0.0) return 0.0;
    double sq = 0.0;
    for (double v : c) sq += v * v;
    return total - sq / total;
  }

  int grow(std::vector<std::size_t>& idx, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const Counts counts = counts_of(idx);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double v) { return v > 0.0; }) <= 1;
    Split split;
    if (depth < max_depth_ && !pure && idx.size() >= 2) split = best_split(idx, weighted_gini(counts, total));
    if (split.feature < 0) {
      auto& node = tree_.nodes[static_cast<std::size_t>(id)];
      for (std::size_t c = 0; c < kNumClasses; ++c) node.distribution[c] = counts[c] / total;
      return id;
    }
    std::vector<std::size_t> left, right;
    const auto f = static_cast<std::size_t>(split.feature);
    for (auto i : idx) (x_(i, f) <= split.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  Split best_split(std::span<const std::size_t> idx, double parent) {
    Split best;
    best.impurity = parent;
    bool found = false;
    std::vector<std::size_t> features(x_.cols());
    std::iota(features.begin(), features.end(), std::size_t{0});
    std::vector<std::size_t> order(idx.begin(), idx.end());
    std::size_t visited = 0;
    for (std::size_t k = 0; k < features.size() && visited < max_features_; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng_.below(features.size() - k));
      std::swap(features[k], features[pick]);
      const std::size_t f = features[k];
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = x_(a, f), vb = x_(b, f);
        return va < vb || (va == vb && a < b);
      });
      if (x_(order.front(), f) == x_(order.back(), f)) continue;  // constant here; does not count
      ++visited;
      Counts left{}, right = counts_of(order);
      double wl = 0.0;
      double wr = std::accumulate(right.begin(), right.end(), 0.0);
      for (std::size_t p = 0; p + 1 < order.size(); ++p) {
        const std::size_t i = order[p];
        const auto c = static_cast<std::size_t>(y_[i]);
        left[c] += weight_[i];
        right[c] -= weight_[i];
        wl += weight_[i];
        wr -= weight_[i];
        const double a = x_(i, f), b = x_(order[p + 1], f);
        if (!(a < b)) continue;
        const double imp = weighted_gini(left, wl) + weighted_gini(right, wr);
        if (!found || imp < best.impurity) {
          found = true;
          best.feature = static_cast<int>(f);
          best.impurity = imp;
          const double mid = a + (b - a) / 2.0;
          best.threshold = mid < b ? mid : a;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const Label> y_;
  std::vector<double> weight_;
  int max_depth_;
  SplitMix64 rng_;
  std::size_t max_features_;
  DecisionTree tree_;
};

}  // namespace

ForestModel ForestModel::fit(const Matrix& x, std::span<const Label> y, const ForestParams& params) {
  if (params.n_estimators < 1) throw ValidationError("RF: n_estimators must be >= 1");
  if (params.max_depth < 0) throw ValidationError("RF: max_depth must be >= 0");
  check_training_data(x, y);
  ForestModel m;
  m.params_ = params;
  m.cols_ = x.cols();
  m.trees_.reserve(static_cast<std::size_t>(params.n_estimators));
  const std::size_t n = x.rows();
  for (int t = 0; t < params.n_estimators; ++t) {
    const std::uint64_t stream = derive_seed(params.seed, static_cast<std::uint64_t>(t));
    SplitMix64 boot(stream);
    std::vector<double> weight(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) weight[boot.below(n)] += 1.0;
    TreeBuilder builder(x, y, std::move(weight), params.max_depth, derive_seed(stream, 1));
    m.trees_.push_back(builder.build());
  }
  return m;
}

Matrix ForestModel::predict_proba(const Matrix& x) const {
  check_features(x, cols_);
  Matrix out(x.rows(), kNumClasses);
  const double inv = 1.0 / static_cast<double>(trees_.size());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (const auto& tree : trees_) {
      const auto& d = tree.leaf(x.row(i)).distribution;
      for (std::size_t c = 0; c < kNumClasses; ++c) out(i, c) += d[c];
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) out(i, c) *= inv;
  }
  return out;
}

nlohmann::json ForestModel::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) {
      if (n.feature >= 0)
        nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
      else
        nodes.push_back({{"distribution", n.distribution}});
    }
    trees.push_back(std::move(nodes));
  }
  return {{"hyperparameters",
           {{"n_estimators", params_.n_estimators}, {"max_depth", params_.max_depth}, {"seed", params_.seed}}},
          {"parameters", {{"cols", cols_}, {"trees", trees}}}};
}

ForestModel ForestModel::from_json(const nlohmann::json& j) {
  ForestModel m;
  const auto& hp = j.at("hyperparameters");
  m.params_ = {hp.at("n_estimators").get<int>(), hp.at("max_depth").get<int>(), hp.at("seed").get<std::uint64_t>()};
  const auto& p = j.at("parameters");
  m.cols_ = p.at("cols").get<std::size_t>();
  for (const auto& tj : p.at("trees")) {
    DecisionTree t;
    for (const auto& nj : tj) {
      TreeNode n;
      if (nj.contains("feature")) {
        n.feature = nj.at("feature").get<int>();
        n.threshold = nj.at("threshold").get<double>();
        n.left = nj.at("left").get<int>();
        n.right = nj.at("right").get<int>();
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= m.cols_) throw FormatError("RF node feature out of range");
      } else {
        n.distribution = nj.at("distribution").get<std::array<double, kNumClasses>>();
      }
      t.nodes.push_back(n);
    }
    if (t.nodes.empty()) throw FormatError("RF tree has no nodes");
    m.trees_.push_back(std::move(t));
  }
  if (m.trees_.empty()) throw FormatError("RF model has no trees");
  return m;
}

}  // namespace enstack::meta
