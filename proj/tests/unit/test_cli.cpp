#include "cli.hpp"

#include <enstack/stacking.hpp>

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "synthetic.hpp"

namespace enstack {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

TEST(Cli, VersionAndHelp) {
  EXPECT_EQ(call({"--version"}).code, 0);
  const auto help = call({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("prepare"), std::string::npos);
  EXPECT_EQ(call({}).code, cli::kExitUsage);
  EXPECT_EQ(call({"train"}).code, cli::kExitUsage);
  EXPECT_EQ(call({"prepare", "--out", "x"}).code, cli::kExitUsage);
}

TEST(CliPrepare, HappyPath) {
  TempDir dir("cli_prepare");
  testing::write_corpus_file(testing::marker_corpus(200, 1), dir / "corpus.jsonl");
  const auto r = call({"prepare", "--corpus", (dir / "corpus.jsonl").string(), "--seed", "4", "--out",
                       (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"train.jsonl", "validation.jsonl", "test.jsonl", "split_manifest.json", "distribution.md",
                        "run_manifest.json"})
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  EXPECT_NE(r.out.find("| Total | | 160 | 20 | 20 |"), std::string::npos) << r.out;
  const auto manifest = json::parse(testing::read_file(dir / "out" / "split_manifest.json"));
  EXPECT_EQ(manifest.at("seed"), 4);
  const auto run = json::parse(testing::read_file(dir / "out" / "run_manifest.json"));
  EXPECT_EQ(run.at("input_digests").at("corpus"), file_digest(dir / "corpus.jsonl"));
}

TEST(CliPrepare, MissingCorpus) {
  TempDir dir("cli_missing");
  const auto r = call({"prepare", "--corpus", (dir / "none.jsonl").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("corpus not found"), std::string::npos) << r.err;
}

TEST(CliPrepare, BadFlags) {
  TempDir dir("cli_flags");
  testing::write_corpus_file(testing::marker_corpus(50, 1), dir / "c.jsonl");
  const std::string c = (dir / "c.jsonl").string(), o = (dir / "o").string();
  EXPECT_EQ(call({"prepare", "--corpus", c, "--out", o, "--ratios", "0.8,0.2"}).code, 2);
  EXPECT_EQ(call({"prepare", "--corpus", c, "--out", o, "--ratios", "0.5,0.1,0.1"}).code, 2);
  EXPECT_EQ(call({"prepare", "--corpus", c, "--out", o, "--caps", "1,2,3"}).code, 2);
  EXPECT_EQ(call({"prepare", "--corpus", c, "--out", o, "--caps", "1,2,x,4,5"}).code, 2);
  EXPECT_EQ(call({"prepare", "--corpus", c, "--out", o, "--format", "xml"}).code, 2);
  write(dir / "bad.jsonl", "{\"id\": 1\n");
  EXPECT_EQ(call({"prepare", "--corpus", (dir / "bad.jsonl").string(), "--out", o}).code, 2);
}

TEST(CliPrepare, TrainingCapsReproduceReferenceTotals) {
  TempDir dir("cli_caps");
  {
    std::ofstream out(dir / "big.jsonl", std::ios::binary);
    const std::size_t per_class[] = {11420, 10990, 530, 5350, 10710};
    std::size_t id = 0;
    for (int c = 0; c < 5; ++c)
      for (std::size_t i = 0; i < per_class[c]; ++i, ++id)
        out << json{{"id", "f" + std::to_string(id)}, {"code", "int f" + std::to_string(id) + "(void);"}, {"label", c}}
                   .dump()
            << "\n";
  }
  const auto r = call({"prepare", "--corpus", (dir / "big.jsonl").string(), "--caps", "5942,5777,249,2755,5582",
                       "--seed", "1", "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("| Total | | 20305 | 3900 | 3900 |"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("| 2 | " + std::string(cwe_name(2)) + " | 249 | 53 | 53 |"), std::string::npos) << r.out;
}

/// Prepared splits plus a config stacking two small built-in base models.
struct RunSetup {
  TempDir dir{"cli_run"};
  fs::path config;

  explicit RunSetup(bool ablation) {
    testing::write_corpus_file(testing::marker_corpus(500, 3), dir / "corpus.jsonl");
    EXPECT_EQ(call({"prepare", "--corpus", (dir / "corpus.jsonl").string(), "--seed", "2", "--out",
                    (dir / "splits").string()})
                  .code,
              0);
    json j = {{"splits", {{"train", "splits/train.jsonl"}, {"validation", "splits/validation.jsonl"},
                          {"test", "splits/test.jsonl"}}},
              {"seed", 2},
              {"base_models",
               {{{"name", "T"}, {"kind", "hashed-token-softmax"}, {"dim", 1024}, {"epochs", 30}},
                {{"name", "N"}, {"kind", "char-ngram-softmax"}, {"dim", 1024}, {"epochs", 30}}}}};
    if (ablation) j["ablation"] = true;
    config = dir / "config.json";
    write(config, j.dump(2));
  }
};

TEST(CliRun, WritesArtifactsAndIsReproducible) {
  RunSetup s(true);
  const auto a = call({"run", "--config", s.config.string(), "--out", (s.dir / "a").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  for (const char* f : {"result.json", "report.txt", "config.json", "run_manifest.json", "selected_model.json",
                        "reports/individual_T.json", "reports/stack_T+N_LR.json", "reports/stack_N_XGBoost.json"})
    EXPECT_TRUE(fs::exists(s.dir / "a" / f)) << f;
  const auto result = json::parse(testing::read_file(s.dir / "a" / "result.json"));
  EXPECT_EQ(result.at("individual").size(), 2u);
  EXPECT_EQ(result.at("rows").size(), 12u);
  EXPECT_NE(a.out.find("Ensemble Stacking T+N (LR)"), std::string::npos);
  EXPECT_NE(a.out.find("Stacking N (RF)"), std::string::npos);

  const auto manifest = json::parse(testing::read_file(s.dir / "a" / "run_manifest.json"));
  EXPECT_EQ(manifest.at("config_hash"), result.at("config_hash"));
  EXPECT_TRUE(manifest.at("timings_seconds").contains("fit_meta"));
  EXPECT_TRUE(manifest.at("input_digests").contains("train"));

  const auto b = call({"run", "--config", s.config.string(), "--out", (s.dir / "b").string()});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(testing::read_file(s.dir / "a" / "result.json"), testing::read_file(s.dir / "b" / "result.json"));
  EXPECT_EQ(testing::read_file(s.dir / "a" / "selected_model.json"),
            testing::read_file(s.dir / "b" / "selected_model.json"));
}

TEST(CliRun, Errors) {
  RunSetup s(false);
  EXPECT_EQ(call({"run", "--config", (s.dir / "nope.json").string(), "--out", (s.dir / "o").string()}).code, 2);
  write(s.dir / "bad.json", "{\"base_models\": [], \"splits\": 3}");
  EXPECT_EQ(call({"run", "--config", (s.dir / "bad.json").string(), "--out", (s.dir / "o").string()}).code, 2);

  auto j = json::parse(testing::read_file(s.config));
  j["splits"]["test"] = "splits/missing.jsonl";
  write(s.dir / "missing.json", j.dump());
  const auto r = call({"run", "--config", (s.dir / "missing.json").string(), "--out", (s.dir / "o").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("pipeline stage prepare"), std::string::npos) << r.err;
}

TEST(CliReport, RendersEveryFormat) {
  RunSetup s(false);
  ASSERT_EQ(call({"run", "--config", s.config.string(), "--out", (s.dir / "r").string()}).code, 0);
  const std::string path = (s.dir / "r" / "result.json").string();

  const auto text = call({"report", path});
  ASSERT_EQ(text.code, 0) << text.err;
  EXPECT_EQ(text.out, testing::read_file(s.dir / "r" / "report.txt"));

  const auto csv = call({"report", path, "--render", "csv"});
  ASSERT_EQ(csv.code, 0);
  EXPECT_EQ(csv.out.substr(0, csv.out.find('\n')),
            "section,model,accuracy,precision,recall,f1,auc_macro,auc_weighted,averaging,error");
  EXPECT_EQ(std::count(csv.out.begin(), csv.out.end(), '\n'), 1 + 2 + 4);

  const auto js = call({"report", path, "--render", "json"});
  ASSERT_EQ(js.code, 0);
  EXPECT_EQ(json::parse(js.out), json::parse(testing::read_file(path)));

  EXPECT_EQ(call({"report", path, "--render", "pdf"}).code, 2);
}

TEST(CliReport, EmptyAndMalformed) {
  TempDir dir("cli_report");
  write(dir / "empty.json", "{}");
  const auto empty = call({"report", (dir / "empty.json").string()});
  EXPECT_EQ(empty.code, 0);
  EXPECT_EQ(empty.out, "no rows\n");
  write(dir / "bad.json", "{\"rows\": [");
  EXPECT_NE(call({"report", (dir / "bad.json").string()}).code, 0);
  write(dir / "shape.json", "{\"rows\": [{\"key\": 1}]}");
  EXPECT_NE(call({"report", (dir / "shape.json").string()}).code, 0);
  EXPECT_NE(call({"report", (dir / "absent.json").string()}).code, 0);
}

}  // namespace
}  // namespace enstack
