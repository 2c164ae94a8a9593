#include <enstack/error.hpp>
#include <enstack/report.hpp>

#include <gtest/gtest.h>

#include <map>
#include <sstream>

namespace enstack {
namespace {

metrics::EvalReport report(double base) {
  metrics::EvalReport r;
  r.accuracy = base;
  r.precision = base - 0.6666;
  r.recall = base;
  r.f1 = base - 1.125;
  r.auc_macro = base + 10.005;
  r.auc_weighted = base + 10.25;
  return r;
}

PipelineResult sample_result() {
  PipelineResult r;
  r.model_order = {"C", "G"};
  r.selection_metric = "accuracy";
  r.cv_folds = 5;
  r.individual = {{"C", report(70), report(71.5)}, {"G", report(72), report(73.25)}};
  for (auto kind : {meta::MetaKind::LR, meta::MetaKind::RF}) {
    for (const std::vector<std::string>& subset :
         {std::vector<std::string>{"C"}, std::vector<std::string>{"C", "G"}}) {
      StackRow row;
      row.key = row_key(subset, kind);
      row.label = row_label(subset, kind);
      row.subset = subset;
      row.kind = kind;
      row.validation = report(75);
      row.test = report(subset.size() == 2 ? 80.125 + static_cast<int>(kind) : 74.0);
      r.rows.push_back(row);
    }
  }
  StackRow failed;
  failed.key = "C+G (SVM)";
  failed.label = "Ensemble Stacking C+G (SVM)";
  failed.subset = {"C", "G"};
  failed.kind = meta::MetaKind::SVM;
  failed.error = "too few samples";
  r.rows.push_back(failed);
  r.selections = {{{"C"}, "C (LR)"}, {{"C", "G"}, "C+G (RF)"}};
  r.selected = "C+G (RF)";
  return r;
}

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line.substr(1));
  for (std::string cell; std::getline(ss, cell, '|');) {
    const auto a = cell.find_first_not_of(' '), b = cell.find_last_not_of(' ');
    out.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
  }
  return out;
}

TEST(RenderText, ThreeSectionsInOrder) {
  const auto text = render_text(sample_result());
  const auto a = text.find("\nIndividual Models\n");
  const auto b = text.find("\nStacked Models with Individual Base Models\n");
  const auto c = text.find("\nEnsemble Stacking Models\n");
  ASSERT_NE(a, std::string::npos);
  ASSERT_NE(b, std::string::npos);
  ASSERT_NE(c, std::string::npos);
  EXPECT_LT(a, b);
  EXPECT_LT(b, c);
  EXPECT_NE(text.find("Base model order: C, G"), std::string::npos);
  EXPECT_NE(text.find("Selected meta-classifier: C+G (RF)"), std::string::npos);
  EXPECT_NE(text.find("| Ensemble Stacking C+G (SVM) | failed: too few samples |"), std::string::npos);
}

TEST(RenderText, ParsedBackMatchesTwoDecimalValues) {
  const auto result = sample_result();
  std::map<std::string, const metrics::EvalReport*> expected;
  for (const auto& r : result.individual) expected[r.name] = &r.test;
  for (const auto& r : result.rows)
    if (r.test) expected[r.label] = &*r.test;

  std::stringstream ss(render_text(result));
  std::size_t parsed = 0;
  std::map<int, int> stars;
  for (std::string line; std::getline(ss, line);) {
    if (line.rfind("| ", 0) != 0 || line.rfind("| Model", 0) == 0) continue;
    const auto c = cells(line);
    const auto it = expected.find(c[0]);
    if (it == expected.end()) continue;
    ASSERT_EQ(c.size(), 6u) << line;
    const double want[] = {it->second->accuracy, it->second->precision, it->second->recall, it->second->f1,
                           it->second->auc_macro};
    for (int k = 0; k < 5; ++k) {
      std::string v = c[1 + k];
      if (!v.empty() && v.back() == '*') {
        v.pop_back();
        ++stars[k];
      }
      EXPECT_EQ(v, metrics::format_percent(want[k])) << line;
      EXPECT_NEAR(std::stod(v), want[k], 0.005 + 1e-9);
    }
    ++parsed;
  }
  EXPECT_EQ(parsed, expected.size());
  // The best value in each column is unique here: C+G (RF) at 81.125.
  for (int k = 0; k < 5; ++k) EXPECT_EQ(stars[k], 1) << "column " << k;
}

TEST(Render, EmptyResult) {
  PipelineResult empty;
  EXPECT_EQ(render_text(empty), "no rows\n");
  EXPECT_EQ(render_csv(empty), "no rows\n");
}

TEST(RenderCsv, HeaderAndOneLinePerRow) {
  const auto result = sample_result();
  std::stringstream ss(render_csv(result));
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header, "section,model,accuracy,precision,recall,f1,auc_macro,auc_weighted,averaging,error");
  std::vector<std::string> lines;
  for (std::string line; std::getline(ss, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), result.individual.size() + result.rows.size());
  EXPECT_EQ(lines[0].substr(0, 20), "Individual Models,C,");
  // Full precision, so the value parses back exactly.
  const auto first = lines[0].substr(20, lines[0].find(',', 20) - 20);
  EXPECT_EQ(std::stod(first), 71.5);
  EXPECT_EQ(lines.back(), "Ensemble Stacking Models,Ensemble Stacking C+G (SVM),,,,,,,,too few samples");
}

TEST(Render, FormatNames) {
  EXPECT_EQ(parse_render_format("csv"), RenderFormat::Csv);
  EXPECT_EQ(parse_render_format("json"), RenderFormat::Json);
  EXPECT_THROW(parse_render_format("html"), ValidationError);
  const auto result = sample_result();
  EXPECT_EQ(nlohmann::json::parse(render(result, RenderFormat::Json)), to_json(result));
}

TEST(DistributionTable, CountsAndTotals) {
  ClassDistribution train{{5942, 5777, 249, 2755, 5582}}, test{{1142, 1099, 53, 535, 1071}};
  const auto table = distribution_table({{"Train", train}, {"Test", test}});
  EXPECT_NE(table.find("| Class | CWE | Train | Test |"), std::string::npos);
  EXPECT_NE(table.find("| 2 | " + std::string(cwe_name(2)) + " | 249 | 53 |"), std::string::npos);
  EXPECT_NE(table.find("| Total | | 20305 | 3900 |"), std::string::npos);
}

TEST(RunManifest, Json) {
  RunManifest m;
  m.command = "run";
  m.config_hash = "abc";
  m.timings = {{"prepare", 0.5}};
  m.outputs = {"result.json"};
  const auto j = to_json(m);
  EXPECT_EQ(j.at("tool"), "enstack");
  EXPECT_EQ(j.at("timings_seconds").at("prepare"), 0.5);
  EXPECT_EQ(j.at("outputs").size(), 1u);
}

}  // namespace
}  // namespace enstack
