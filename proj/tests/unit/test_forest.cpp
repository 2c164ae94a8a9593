#include <enstack/error.hpp>
#include <enstack/meta/forest.hpp>

#include <gtest/gtest.h>

#include "datasets.hpp"

namespace enstack::meta {
namespace {

TEST(Forest, ConstantFeaturesGiveSingleLeafTrees) {
  std::vector<Label> y(10, 2);
  y[9] = 0;
  const auto m = ForestModel::fit(Matrix(10, 1, 0.5), y);
  for (const auto& t : m.trees()) EXPECT_EQ(t.nodes.size(), 1u);
}

TEST(Forest, SingleRegionPureClass) {
  const auto d = testing::blobs(60, 3, 2, 6.0, 1);
  std::vector<Label> y = d.y;
  for (auto& l : y) l = l == 0 ? 2 : 3;
  const auto m = ForestModel::fit(d.x, y);
  Matrix q(1, 3, 0.0);
  q(0, 0) = 9.0;  // deep inside the first cluster
  const auto p = m.predict_proba(q);
  EXPECT_EQ(p(0, 0), 0.0);
  EXPECT_EQ(p(0, 1), 0.0);
  EXPECT_GT(p(0, 2), 0.95);
  EXPECT_EQ(p(0, 4), 0.0);
}

TEST(Forest, DepthLimitAndVoteSums) {
  const auto d = testing::blobs(300, 4, 5, 1.0, 2);
  const auto m = ForestModel::fit(d.x, d.y);
  ASSERT_EQ(m.trees().size(), 200u);
  for (const auto& t : m.trees()) EXPECT_LE(t.depth(), 10);
  const auto p = m.predict_proba(d.x);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 5; ++c) s += p(r, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Forest, BitReproducibleWithSeed) {
  const auto d = testing::prob_rows(200, 2, 0.6, 3);
  const auto a = ForestModel::fit(d.x, d.y);
  const auto b = ForestModel::fit(d.x, d.y);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_EQ(a.predict_proba(d.x), b.predict_proba(d.x));
  ForestParams other;
  other.seed = 43;
  EXPECT_NE(ForestModel::fit(d.x, d.y, other).to_json().dump(), a.to_json().dump());
}

TEST(Forest, ShiftedDataGivesShiftedThresholds) {
  const auto d = testing::blobs(120, 3, 4, 2.0, 4);
  ForestParams p;
  p.n_estimators = 20;
  Matrix shifted = d.x;
  for (auto& v : shifted.data()) v += 0.5;  // exact in binary
  const auto a = ForestModel::fit(d.x, d.y, p);
  const auto b = ForestModel::fit(shifted, d.y, p);
  for (std::size_t t = 0; t < a.trees().size(); ++t) {
    const auto& na = a.trees()[t].nodes;
    const auto& nb = b.trees()[t].nodes;
    ASSERT_EQ(na.size(), nb.size());
    for (std::size_t k = 0; k < na.size(); ++k) {
      EXPECT_EQ(na[k].feature, nb[k].feature);
      if (na[k].feature >= 0) EXPECT_NEAR(na[k].threshold + 0.5, nb[k].threshold, 1e-12);
    }
  }
  EXPECT_EQ(a.predict_proba(d.x), b.predict_proba(shifted));
}

TEST(Forest, JsonRoundTripIsBitExact) {
  const auto d = testing::prob_rows(100, 2, 0.6, 5);
  ForestParams p;
  p.n_estimators = 15;
  const auto m = ForestModel::fit(d.x, d.y, p);
  const auto back = ForestModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(back.predict_proba(d.x), m.predict_proba(d.x));
}

}  // namespace
}  // namespace enstack::meta
