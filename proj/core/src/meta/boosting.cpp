#include "enstack/meta/boosting.hpp"

#include "enstack/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace enstack::meta {

double RegTree::predict(std::span<const double> row) const {
  const RegNode* node = &nodes.front();
  while (node->feature >= 0)
    node = &nodes[static_cast<std::size_t>(row[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left
                                                                                                            : node->right)];
  return node->value;
}

int RegTree::depth() const {
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

// Same threshold as the reference booster: splits must gain more than this.
constexpr double kMinGain = 1e-6;

struct Candidate {
  double gain = kMinGain;
  int feature = -1;
  double threshold = 0.0;
};

class RegTreeBuilder {
 public:
  RegTreeBuilder(const Matrix& x, const std::vector<std::vector<std::size_t>>& sorted, const BoostParams& p)
      : x_(x), sorted_(sorted), p_(p) {}

  RegTree build(const std::vector<double>& g, const std::vector<double>& h) {
    const std::size_t n = x_.rows();
    RegTree tree;
    tree.nodes.emplace_back();
    std::vector<int> node_of(n, 0);
    std::vector<double> gsum(1, std::accumulate(g.begin(), g.end(), 0.0));
    std::vector<double> hsum(1, std::accumulate(h.begin(), h.end(), 0.0));
    std::vector<int> active{0};

    for (int depth = 0; depth < p_.max_depth && !active.empty(); ++depth) {
      std::vector<Candidate> best(tree.nodes.size());
      std::vector<double> gl(tree.nodes.size()), hl(tree.nodes.size()), prev(tree.nodes.size());
      std::vector<char> started(tree.nodes.size());
      std::vector<char> is_active(tree.nodes.size(), 0);
      for (int a : active) is_active[static_cast<std::size_t>(a)] = 1;
      for (std::size_t f = 0; f < x_.cols(); ++f) {
        std::fill(gl.begin(), gl.end(), 0.0);
        std::fill(hl.begin(), hl.end(), 0.0);
        std::fill(started.begin(), started.end(), 0);
        for (std::size_t i : sorted_[f]) {
          const auto nd = static_cast<std::size_t>(node_of[i]);
          if (node_of[i] < 0 || !is_active[nd]) continue;
          const double v = x_(i, f);
          if (started[nd] && v > prev[nd]) {
            const double gr = gsum[nd] - gl[nd], hr = hsum[nd] - hl[nd];
            if (hl[nd] >= p_.min_child_weight && hr >= p_.min_child_weight) {
              const double gain = 0.5 * (gl[nd] * gl[nd] / (hl[nd] + p_.lambda) + gr * gr / (hr + p_.lambda) -
                                         gsum[nd] * gsum[nd] / (hsum[nd] + p_.lambda));
              if (gain > best[nd].gain) {
                const double mid = prev[nd] + (v - prev[nd]) / 2.0;
                best[nd] = {gain, static_cast<int>(f), mid < v ? mid : prev[nd]};
              }
            }
          }
          gl[nd] += g[i];
          hl[nd] += h[i];
          prev[nd] = v;
          started[nd] = 1;
        }
      }
      std::vector<int> next;
      for (int a : active) {
        const auto& b = best[static_cast<std::size_t>(a)];
        if (b.feature < 0) continue;
        const int l = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& node = tree.nodes[static_cast<std::size_t>(a)];
        node.feature = b.feature;
        node.threshold = b.threshold;
        node.left = l;
        node.right = l + 1;
        gsum.resize(tree.nodes.size(), 0.0);
        hsum.resize(tree.nodes.size(), 0.0);
        next.push_back(l);
        next.push_back(l + 1);
      }
      if (next.empty()) break;
      for (std::size_t i = 0; i < n; ++i) {
        if (node_of[i] < 0) continue;
        const auto& node = tree.nodes[static_cast<std::size_t>(node_of[i])];
        if (node.feature < 0) continue;
        node_of[i] = x_(i, static_cast<std::size_t>(node.feature)) <= node.threshold ? node.left : node.right;
        gsum[static_cast<std::size_t>(node_of[i])] += g[i];
        hsum[static_cast<std::size_t>(node_of[i])] += h[i];
      }
      active = std::move(next);
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k)
      if (tree.nodes[k].feature < 0) tree.nodes[k].value = -p_.learning_rate * gsum[k] / (hsum[k] + p_.lambda);
    return tree;
  }

 private:
  const Matrix& x_;
  const std::vector<std::vector<std::size_t>>& sorted_;
  const BoostParams& p_;
};

void softmax_present(std::span<double> scores, const ClassMask& present) {
  double m = -INFINITY;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    if (present[c]) m = std::max(m, scores[c]);
  double sum = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) sum += (scores[c] = present[c] ? std::exp(scores[c] - m) : 0.0);
  for (double& v : scores) v /= sum;
}

double mlogloss(const Matrix& scores, std::span<const Label> y, const ClassMask& present) {
  double acc = 0.0;
  std::array<double, kNumClasses> p{};
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    std::copy(row.begin(), row.end(), p.begin());
    double m = -INFINITY;
    for (std::size_t c = 0; c < kNumClasses; ++c)
      if (present[c]) m = std::max(m, p[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c)
      if (present[c]) sum += std::exp(p[c] - m);
    acc += m + std::log(sum) - p[static_cast<std::size_t>(y[i])];
  }
  return acc / static_cast<double>(scores.rows());
}

}  // namespace

BoostModel BoostModel::fit(const Matrix& x, std::span<const Label> y, const BoostParams& params) {
  if (params.n_estimators < 0) throw ValidationError("GBT: n_estimators must be >= 0");
  if (!(params.learning_rate > 0.0)) throw ValidationError("GBT: learning rate must be positive");
  if (params.max_depth < 0) throw ValidationError("GBT: max_depth must be >= 0");
  if (!(params.lambda >= 0.0)) throw ValidationError("GBT: lambda must be >= 0");
  BoostModel m;
  m.present_ = check_training_data(x, y);
  m.params_ = params;
  m.cols_ = x.cols();
  const std::size_t n = x.rows();
  std::array<double, kNumClasses> counts{};
  for (Label l : y) counts[static_cast<std::size_t>(l)] += 1.0;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    m.init_score_[c] = m.present_[c] ? std::log(counts[c] / static_cast<double>(n)) : 0.0;

  std::vector<std::vector<std::size_t>> sorted(x.cols(), std::vector<std::size_t>(n));
  for (std::size_t f = 0; f < x.cols(); ++f) {
    std::iota(sorted[f].begin(), sorted[f].end(), std::size_t{0});
    std::stable_sort(sorted[f].begin(), sorted[f].end(), [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
  }

  Matrix scores(n, kNumClasses);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < kNumClasses; ++c) scores(i, c) = m.init_score_[c];
  m.loss_history_.push_back(mlogloss(scores, y, m.present_));

  RegTreeBuilder builder(x, sorted, m.params_);
  Matrix prob(n, kNumClasses);
  std::vector<double> g(n), h(n);
  for (int r = 0; r < params.n_estimators; ++r) {
    prob = scores;
    for (std::size_t i = 0; i < n; ++i) softmax_present(prob.row(i), m.present_);
    auto& round = m.rounds_.emplace_back();
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (!m.present_[c]) continue;
      for (std::size_t i = 0; i < n; ++i) {
        const double p = prob(i, c);
        g[i] = p - (static_cast<std::size_t>(y[i]) == c ? 1.0 : 0.0);
        h[i] = std::max(p * (1.0 - p), 1e-16);
      }
      round[c] = builder.build(g, h);
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (!m.present_[c]) continue;
      for (std::size_t i = 0; i < n; ++i) scores(i, c) += round[c].predict(x.row(i));
    }
    m.loss_history_.push_back(mlogloss(scores, y, m.present_));
  }
  return m;
}

Matrix BoostModel::raw_scores(const Matrix& x) const {
  check_features(x, cols_);
  Matrix out(x.rows(), kNumClasses);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (!present_[c]) continue;
      double s = init_score_[c];
      for (const auto& round : rounds_) s += round[c].predict(x.row(i));
      out(i, c) = s;
    }
  return out;
}

Matrix BoostModel::predict_proba(const Matrix& x) const {
  Matrix out = raw_scores(x);
  for (std::size_t i = 0; i < out.rows(); ++i) softmax_present(out.row(i), present_);
  return out;
}

nlohmann::json BoostModel::to_json() const {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& round : rounds_) {
    nlohmann::json per_class = nlohmann::json::array();
    for (const auto& tree : round) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const auto& nd : tree.nodes) {
        if (nd.feature >= 0)
          nodes.push_back({{"feature", nd.feature}, {"threshold", nd.threshold}, {"left", nd.left}, {"right", nd.right}});
        else
          nodes.push_back({{"value", nd.value}});
      }
      per_class.push_back(std::move(nodes));
    }
    rounds.push_back(std::move(per_class));
  }
  return {{"hyperparameters",
           {{"n_estimators", params_.n_estimators},
            {"learning_rate", params_.learning_rate},
            {"max_depth", params_.max_depth},
            {"lambda", params_.lambda},
            {"min_child_weight", params_.min_child_weight},
            {"objective", "multi:softprob"},
            {"eval_metric", "mlogloss"}}},
          {"parameters",
           {{"cols", cols_},
            {"present", present_},
            {"init_score", init_score_},
            {"rounds", rounds},
            {"loss_history", loss_history_}}}};
}

BoostModel BoostModel::from_json(const nlohmann::json& j) {
  BoostModel m;
  const auto& hp = j.at("hyperparameters");
  m.params_ = {hp.at("n_estimators").get<int>(), hp.at("learning_rate").get<double>(), hp.at("max_depth").get<int>(),
               hp.at("lambda").get<double>(), hp.at("min_child_weight").get<double>()};
  const auto& p = j.at("parameters");
  m.cols_ = p.at("cols").get<std::size_t>();
  m.present_ = p.at("present").get<ClassMask>();
  m.init_score_ = p.at("init_score").get<std::array<double, kNumClasses>>();
  m.loss_history_ = p.at("loss_history").get<std::vector<double>>();
  for (const auto& rj : p.at("rounds")) {
    if (rj.size() != kNumClasses) throw FormatError("GBT round must hold 5 trees");
    auto& round = m.rounds_.emplace_back();
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      for (const auto& nj : rj[c]) {
        RegNode nd;
        if (nj.contains("feature")) {
          nd.feature = nj.at("feature").get<int>();
          nd.threshold = nj.at("threshold").get<double>();
          nd.left = nj.at("left").get<int>();
          nd.right = nj.at("right").get<int>();
        } else {
          nd.value = nj.at("value").get<double>();
        }
        round[c].nodes.push_back(nd);
      }
      if (m.present_[c] && round[c].nodes.empty()) throw FormatError("GBT tree for a present class is empty");
    }
  }
  return m;
}

}  // namespace enstack::meta
