#include <enstack/error.hpp>
#include <enstack/rng.hpp>
#include <enstack/stacking.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "fixtures.hpp"
#include "synthetic.hpp"

namespace enstack {
namespace {

using nlohmann::json;
using testing::TempDir;

std::shared_ptr<const ProbTable> table_of(const Corpus& c, const std::string& name, double hit, std::uint64_t seed) {
  return std::make_shared<const ProbTable>(testing::noisy_probs(c, name, hit, seed));
}

TEST(MetaFeatures, LengthAndRowSums) {
  const Corpus corpus = testing::marker_corpus(40, 1);
  std::vector<BaseModel> models;
  for (int k = 1; k <= 3; ++k) {
    models.push_back(external_model(std::string(1, "CGU"[k - 1]), table_of(corpus, "m", 0.7, k)));
    const auto ds = build_meta_features(models, corpus);
    ASSERT_EQ(ds.z.cols(), static_cast<std::size_t>(5 * k));
    ASSERT_EQ(ds.z.rows(), corpus.size());
    ASSERT_EQ(ds.y.size(), corpus.size());
    for (std::size_t r = 0; r < ds.z.rows(); ++r) {
      const auto row = ds.z.row(r);
      for (double v : row) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), k, 1e-5);
    }
  }
}

TEST(MetaFeatures, SingleModelRowIsItsVector) {
  const Corpus corpus = testing::marker_corpus(10, 2);
  const auto t = table_of(corpus, "C", 0.7, 3);
  const std::vector<BaseModel> models{external_model("C", t)};
  const auto ds = build_meta_features(models, corpus);
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    const auto* p = t->find(corpus[r].id);
    for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(ds.z(r, c), (*p)[c], 1e-15);
  }
}

TEST(MetaFeatures, ConcatenationInDeclaredOrder) {
  const Corpus corpus({{"a", "int f();", 0}});
  auto first = std::make_shared<ProbTable>("A");
  first->insert("a", {1, 0, 0, 0, 0});
  auto second = std::make_shared<ProbTable>("B");
  second->insert("a", {0, 0, 0, 0, 1});
  const std::vector<BaseModel> models{external_model("A", first), external_model("B", second)};
  const auto ds = build_meta_features(models, corpus);
  const std::vector<double> expected{1, 0, 0, 0, 0, 0, 0, 0, 0, 1};
  EXPECT_EQ(ds.z.data(), expected);
  EXPECT_EQ(ds.model_order, (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(ds.subset(std::vector<std::string>{"B"}).z.data(), (std::vector<double>{0, 0, 0, 0, 1}));
}

TEST(MetaFeatures, CoverageGapListsMissingIds) {
  const Corpus corpus = testing::marker_corpus(6, 4);
  auto partial = std::make_shared<ProbTable>("C");
  partial->insert(corpus[0].id, {0.2, 0.2, 0.2, 0.2, 0.2});
  const std::vector<BaseModel> models{external_model("C", partial)};
  try {
    build_meta_features(models, corpus);
    FAIL() << "expected CoverageError";
  } catch (const CoverageError& e) {
    EXPECT_EQ(e.missing().size(), 5u);
    EXPECT_NE(std::string(e.what()).find(corpus[5].id), std::string::npos);
  }
}

TEST(MetaFeatures, UnlabeledBuildNeverNeedsLabels) {
  std::vector<CodeSample> samples{{"x", "int a;", std::nullopt}};
  const Corpus corpus(samples);
  auto t = std::make_shared<ProbTable>("C");
  t->insert("x", {0.2, 0.2, 0.2, 0.2, 0.2});
  const std::vector<BaseModel> models{external_model("C", t)};
  EXPECT_TRUE(build_meta_features(models, corpus, false).y.empty());
  EXPECT_THROW(build_meta_features(models, corpus, true), ValidationError);
}

metrics::EvalReport with_accuracy(double acc) {
  metrics::EvalReport r;
  r.accuracy = acc;
  return r;
}

TEST(SelectMeta, Examples) {
  using meta::MetaKind;
  const std::vector<SelectionCandidate> two{{MetaKind::LR, with_accuracy(80)}, {MetaKind::RF, with_accuracy(82)}};
  EXPECT_EQ(select_meta(two, "accuracy"), 1u);
  const std::vector<SelectionCandidate> tie{{MetaKind::GBT, with_accuracy(80)}, {MetaKind::SVM, with_accuracy(80)},
                                            {MetaKind::RF, with_accuracy(80)}};
  EXPECT_EQ(select_meta(tie, "accuracy"), 2u);
  const std::vector<SelectionCandidate> one{{MetaKind::SVM, with_accuracy(10)}};
  EXPECT_EQ(select_meta(one, "accuracy"), 0u);
  EXPECT_THROW(select_meta(std::vector<SelectionCandidate>{}, "accuracy"), ValidationError);
  EXPECT_THROW(select_meta(two, "speed"), ValidationError);
}

TEST(Naming, RowKeysAndLabels) {
  const std::vector<std::string> gu{"G", "U"}, c{"C"}, cg{"C", "G"};
  EXPECT_EQ(row_key(gu, meta::MetaKind::LR), "G+U (LR)");
  EXPECT_EQ(row_key(gu, meta::MetaKind::RF), "G+U (RF)");
  EXPECT_EQ(row_key(gu, meta::MetaKind::SVM), "G+U (SVM)");
  EXPECT_EQ(row_key(gu, meta::MetaKind::GBT), "G+U (XGBoost)");
  EXPECT_EQ(row_label(cg, meta::MetaKind::LR), "Ensemble Stacking C+G (LR)");
  EXPECT_EQ(row_label(c, meta::MetaKind::SVM), "Stacking C (SVM)");
}

/// A corpus plus three external probability files named C, G and U.
struct ExternalSetup {
  TempDir dir{"stacking"};
  Corpus corpus;

  explicit ExternalSetup(std::size_t n = 600, std::uint64_t seed = 5) : corpus(testing::marker_corpus(n, seed)) {
    testing::write_corpus_file(corpus, dir / "corpus.jsonl");
    const char* names[] = {"C", "G", "U"};
    const double hits[] = {0.70, 0.75, 0.80};
    for (int m = 0; m < 3; ++m)
      testing::write_probs_file(testing::noisy_probs(corpus, names[m], hits[m], 100 + m),
                                dir / (std::string(names[m]) + ".jsonl"));
  }

  json config() const {
    json bases = json::array();
    for (const char* n : {"C", "G", "U"})
      bases.push_back({{"name", n}, {"kind", "external"}, {"probs", (dir / (std::string(n) + ".jsonl")).string()}});
    return {{"corpus", (dir / "corpus.jsonl").string()}, {"seed", 9}, {"base_models", bases}};
  }
};

TEST(Pipeline, AblationRowCountAndNames) {
  ExternalSetup s;
  auto j = s.config();
  j["subsets"] = {{"C"}, {"G"}, {"C", "G"}};
  const auto r = run_pipeline(parse_pipeline_config(j));
  ASSERT_EQ(r.rows.size(), 12u);
  EXPECT_EQ(r.individual.size(), 3u);
  EXPECT_EQ(r.rows[0].key, "C (LR)");
  EXPECT_EQ(r.rows[11].label, "Ensemble Stacking C+G (XGBoost)");
  ASSERT_EQ(r.selections.size(), 3u);
  EXPECT_EQ(r.selected, r.selections[2].selected_key);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(row.error.empty()) << row.key << ": " << row.error;
    EXPECT_TRUE(row.validation && row.test);
  }
  ASSERT_TRUE(r.selected_model);

  auto ablation = s.config();
  ablation["ablation"] = true;
  const auto full = run_pipeline(parse_pipeline_config(ablation));
  EXPECT_EQ(full.rows.size(), 16u);
  EXPECT_EQ(full.rows.back().key, "C+G+U (XGBoost)");
}

TEST(Pipeline, SelectedIsBestValidationCandidate) {
  ExternalSetup s;
  const auto r = run_pipeline(parse_pipeline_config(s.config()));
  ASSERT_EQ(r.rows.size(), 4u);
  double best = -1;
  std::string best_key;
  for (const auto& row : r.rows)
    if (row.validation->accuracy > best) best = row.validation->accuracy, best_key = row.key;
  EXPECT_EQ(r.selected, best_key);
  EXPECT_EQ(r.selected_model->kind(), meta::parse_meta_kind(best_key.substr(best_key.find('(') + 1,
                                                                            best_key.size() - best_key.find('(') - 2)));
}

TEST(Pipeline, SingleCandidateIsSelected) {
  ExternalSetup s;
  auto j = s.config();
  j["base_models"] = json::array({j["base_models"][1]});
  j["meta_kinds"] = {"SVM"};
  const auto r = run_pipeline(parse_pipeline_config(j));
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.selected, "G (SVM)");
  EXPECT_EQ(r.selected_model->kind(), meta::MetaKind::SVM);
}

TEST(Pipeline, DeterministicJson) {
  ExternalSetup s;
  const auto cfg = parse_pipeline_config(s.config());
  const auto a = to_json(run_pipeline(cfg)).dump();
  auto threaded = cfg;
  threaded.threads = 1;
  EXPECT_EQ(a, to_json(run_pipeline(threaded)).dump());
  EXPECT_EQ(a, to_json(run_pipeline(cfg)).dump());
}

TEST(Pipeline, InvariantToCorpusOrder) {
  ExternalSetup s;
  std::vector<CodeSample> samples(s.corpus.begin(), s.corpus.end());
  SplitMix64 rng(77);
  rng.shuffle(std::span(samples));
  testing::write_corpus_file(Corpus(samples), s.dir / "shuffled.jsonl");
  auto j = s.config();
  const auto a = to_json(run_pipeline(parse_pipeline_config(j)));
  j["corpus"] = (s.dir / "shuffled.jsonl").string();
  const auto b = to_json(run_pipeline(parse_pipeline_config(j)));
  EXPECT_NE(a.at("input_digests"), b.at("input_digests"));
  for (const char* key : {"individual", "rows", "selections", "split_distributions"})
    EXPECT_EQ(a.at(key).dump(), b.at(key).dump()) << key;
}

TEST(Pipeline, TestLabelsAreReadOnlyAtEvaluation) {
  ExternalSetup s;
  LabelAudit audit;
  run_pipeline(parse_pipeline_config(s.config()), {&audit});
  const auto events = audit.events();
  ASSERT_FALSE(events.empty());
  std::size_t test_reads = 0;
  for (const auto& e : events)
    if (e.split == "test") ++test_reads;
  EXPECT_EQ(test_reads, 1u);
  EXPECT_EQ(events.back().split, "test");
  EXPECT_EQ(events.back().stage, "evaluate");
  EXPECT_EQ(events.front().split, "train");
}

TEST(Pipeline, ResultJsonRoundTrip) {
  ExternalSetup s;
  const auto r = run_pipeline(parse_pipeline_config(s.config()));
  const auto j = to_json(r);
  EXPECT_EQ(j.at("schema_version"), 1);
  const auto back = result_from_json(json::parse(j.dump()));
  EXPECT_EQ(to_json(back).dump(), j.dump());
}

TEST(Pipeline, ErrorsNameTheStage) {
  ExternalSetup s;
  auto missing = s.config();
  missing["corpus"] = (s.dir / "nope.jsonl").string();
  try {
    run_pipeline(parse_pipeline_config(missing));
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "prepare");
  }

  auto no_probs = s.config();
  no_probs["base_models"][0]["probs"] = (s.dir / "absent.jsonl").string();
  try {
    run_pipeline(parse_pipeline_config(no_probs));
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "train_base");
  }

  // A table covering only the first half of the ids.
  std::vector<CodeSample> half(s.corpus.begin(), s.corpus.begin() + 300);
  testing::write_probs_file(testing::noisy_probs(Corpus(half), "C", 0.7, 1), s.dir / "half.jsonl");
  auto gap = s.config();
  gap["base_models"][0]["probs"] = (s.dir / "half.jsonl").string();
  try {
    run_pipeline(parse_pipeline_config(gap));
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "meta_features");
    EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
  }
}

TEST(Config, RejectsInvalidDocuments) {
  ExternalSetup s(50);
  const auto ok = s.config();
  EXPECT_NO_THROW(parse_pipeline_config(ok).validate());

  auto unknown = ok;
  unknown["colour"] = "blue";
  EXPECT_THROW(parse_pipeline_config(unknown), ValidationError);

  auto both = ok;
  both["splits"] = {{"train", "a"}, {"validation", "b"}, {"test", "c"}};
  EXPECT_THROW(parse_pipeline_config(both), ValidationError);

  auto kind = ok;
  kind["meta_kinds"] = {"LR", "kNN"};
  EXPECT_THROW(parse_pipeline_config(kind), ValidationError);

  auto subset = ok;
  subset["subsets"] = {{"C", "Z"}};
  EXPECT_THROW(parse_pipeline_config(subset).validate(), ValidationError);

  auto folds = ok;
  folds["cv_folds"] = 1;
  EXPECT_THROW(parse_pipeline_config(folds).validate(), ValidationError);

  auto metric = ok;
  metric["selection_metric"] = "mcc";
  EXPECT_THROW(parse_pipeline_config(metric).validate(), ValidationError);

  auto dup = ok;
  dup["base_models"].push_back(dup["base_models"][0]);
  EXPECT_THROW(parse_pipeline_config(dup).validate(), ValidationError);

  auto cfg = parse_pipeline_config(ok);
  cfg.base_models.clear();
  try {
    run_pipeline(cfg);
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "config");
  }
}

TEST(Config, RelativePathsAndHash) {
  ExternalSetup s(50);
  json j = {{"corpus", "corpus.jsonl"},
            {"base_models", {{{"name", "T"}, {"kind", "hashed-token-softmax"}, {"epochs", 5}}}}};
  const auto cfg = parse_pipeline_config(j, s.dir.path());
  EXPECT_EQ(std::get<CorpusSource>(cfg.data).path, s.dir / "corpus.jsonl");
  auto threaded = cfg;
  threaded.threads = 7;
  EXPECT_EQ(config_hash(cfg), config_hash(threaded));
  auto other = cfg;
  other.seeds.cv = 1;
  EXPECT_NE(config_hash(cfg), config_hash(other));
  EXPECT_EQ(parse_pipeline_config(to_json(cfg)).meta_kinds.size(), 4u);
  EXPECT_EQ(config_hash(parse_pipeline_config(to_json(cfg))), config_hash(cfg));
}

}  // namespace
}  // namespace enstack
