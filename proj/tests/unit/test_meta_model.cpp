#include <enstack/error.hpp>
#include <enstack/meta/meta_model.hpp>

#include <gtest/gtest.h>

#include <limits>

#include "datasets.hpp"

namespace enstack::meta {
namespace {

TEST(MetaKindNames, ParseAndPrint) {
  EXPECT_EQ(parse_meta_kind("LR"), MetaKind::LR);
  EXPECT_EQ(parse_meta_kind("RF"), MetaKind::RF);
  EXPECT_EQ(parse_meta_kind("SVM"), MetaKind::SVM);
  EXPECT_EQ(parse_meta_kind("XGBoost"), MetaKind::GBT);
  EXPECT_EQ(parse_meta_kind("GBT"), MetaKind::GBT);
  EXPECT_THROW(parse_meta_kind("knn"), ValidationError);
  for (auto k : kAllMetaKinds) EXPECT_EQ(parse_meta_kind(to_string(k)), k);
}

TEST(Argmax, TiesGoToLowestClass) {
  Matrix p(3, 5, 0.0);
  p(0, 0) = p(0, 1) = 0.5;
  p(1, 3) = p(1, 4) = 0.5;
  for (int c = 0; c < 5; ++c) p(2, c) = 0.2;
  EXPECT_EQ(argmax_rows(p), (std::vector<Label>{0, 3, 0}));
}

TEST(MetaModel, UniformPredictsClassZero) {
  const MetaModel m(LogisticModel::zeros(10));
  const auto labels = m.predict(Matrix(4, 10, 0.1));
  for (Label l : labels) EXPECT_EQ(l, 0);
}

class EveryKind : public ::testing::TestWithParam<MetaKind> {};

TEST_P(EveryKind, PredictIsArgmaxOfProbabilities) {
  const auto d = testing::prob_rows(120, 2, 0.7, 11);
  const auto m = fit(GetParam(), d.x, d.y);
  EXPECT_EQ(m.kind(), GetParam());
  EXPECT_EQ(m.input_dim(), 10u);
  const auto p = m.predict_proba(d.x);
  EXPECT_EQ(m.predict(d.x), argmax_rows(p));
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 5; ++c) {
      EXPECT_GE(p(r, c), 0.0);
      EXPECT_LE(p(r, c), 1.0);
      s += p(r, c);
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST_P(EveryKind, JsonRoundTripKeepsPredictions) {
  const auto d = testing::prob_rows(100, 1, 0.7, 12);
  const auto m = fit(GetParam(), d.x, d.y);
  const auto j = m.to_json();
  EXPECT_EQ(j.at("schema_version"), kMetaSchemaVersion);
  EXPECT_EQ(j.at("kind"), std::string(to_string(GetParam())));
  const auto back = MetaModel::from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.kind(), m.kind());
  EXPECT_EQ(back.predict_proba(d.x), m.predict_proba(d.x));
  EXPECT_EQ(back.to_json().dump(), j.dump());
}

TEST_P(EveryKind, RejectsBadTrainingData) {
  const auto d = testing::prob_rows(60, 1, 0.7, 13);
  EXPECT_THROW(fit(GetParam(), d.x, std::vector<Label>(60, 1)), DegenerateError);
  auto bad = d.x;
  bad(3, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fit(GetParam(), bad, d.y), ValidationError);
  EXPECT_THROW(fit(GetParam(), d.x, std::vector<Label>(59, 1)), DimensionError);
}

TEST_P(EveryKind, RejectsWrongWidthAtPrediction) {
  const auto d = testing::prob_rows(60, 1, 0.7, 14);
  const auto m = fit(GetParam(), d.x, d.y);
  EXPECT_THROW(m.predict_proba(Matrix(2, 10, 0.1)), DimensionError);
}

INSTANTIATE_TEST_SUITE_P(Kinds, EveryKind, ::testing::ValuesIn(kAllMetaKinds),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(MetaModel, FromJsonRejectsUnknownSchema) {
  const auto d = testing::prob_rows(60, 1, 0.7, 15);
  auto j = fit(MetaKind::LR, d.x, d.y).to_json();
  j["schema_version"] = 99;
  EXPECT_THROW(MetaModel::from_json(j), Error);
}

}  // namespace
}  // namespace enstack::meta
