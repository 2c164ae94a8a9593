#include "enstack/report.hpp"

#include "enstack/error.hpp"
#include "enstack/version.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace enstack {

RenderFormat parse_render_format(std::string_view name) {
  if (name == "text") return RenderFormat::Text;
  if (name == "json") return RenderFormat::Json;
  if (name == "csv") return RenderFormat::Csv;
  throw ValidationError("unknown render format '" + std::string(name) + "' (expected text, json or csv)");
}

namespace {

constexpr std::array<std::string_view, 5> kColumns{"Accuracy (%)", "Precision (%)", "Recall (%)", "F1-Score (%)",
                                                   "AUC-Score (%)"};

std::array<double, 5> columns_of(const metrics::EvalReport& r) {
  return {r.accuracy, r.precision, r.recall, r.f1, r.auc_macro};
}

struct TextRow {
  std::string section;
  std::string label;
  const metrics::EvalReport* test = nullptr;
  std::string error;
};

std::vector<TextRow> text_rows(const PipelineResult& result) {
  std::vector<TextRow> rows;
  for (const auto& r : result.individual) rows.push_back({"Individual Models", r.name, &r.test, {}});
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& r : result.rows) {
      if ((r.subset.size() == 1) != (pass == 0)) continue;
      rows.push_back({pass == 0 ? "Stacked Models with Individual Base Models" : "Ensemble Stacking Models", r.label,
                      r.test ? &*r.test : nullptr, r.error.empty() && !r.test ? "not evaluated" : r.error});
    }
  return rows;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string full_precision(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string render_text(const PipelineResult& result) {
  if (result.empty()) return "no rows\n";
  const auto rows = text_rows(result);

  // Best per column compares the rendered values, so equal-looking cells are both marked.
  std::array<double, 5> best;
  best.fill(-1.0);
  for (const auto& r : rows)
    if (r.test) {
      const auto v = columns_of(*r.test);
      for (std::size_t c = 0; c < v.size(); ++c) best[c] = std::max(best[c], std::stod(metrics::format_percent(v[c])));
    }

  std::ostringstream out;
  if (!result.model_order.empty()) {
    out << "Base model order: ";
    for (std::size_t i = 0; i < result.model_order.size(); ++i) out << (i ? ", " : "") << result.model_order[i];
    out << "\n";
  }
  if (!result.selected.empty())
    out << "Selected meta-classifier: " << result.selected << " (by " << result.selection_metric << ", "
        << result.cv_folds << "-fold CV on validation)\n";
  out << "Test-set metrics; '*' marks the best value in each column.\n";

  std::string section;
  for (const auto& r : rows) {
    if (r.section != section) {
      section = r.section;
      out << "\n" << section << "\n| Model |";
      for (auto c : kColumns) out << ' ' << c << " |";
      out << "\n|---|---|---|---|---|---|\n";
    }
    out << "| " << r.label << " |";
    if (!r.test) {
      out << " failed: " << r.error << " |\n";
      continue;
    }
    const auto v = columns_of(*r.test);
    for (std::size_t c = 0; c < v.size(); ++c) {
      const std::string cell = metrics::format_percent(v[c]);
      out << ' ' << cell << (std::stod(cell) == best[c] ? "*" : "") << " |";
    }
    out << "\n";
  }
  return out.str();
}

std::string render_csv(const PipelineResult& result) {
  if (result.empty()) return "no rows\n";
  std::ostringstream out;
  out << "section,model,accuracy,precision,recall,f1,auc_macro,auc_weighted,averaging,error\n";
  for (const auto& r : text_rows(result)) {
    out << csv_field(r.section) << ',' << csv_field(r.label);
    if (r.test) {
      for (double v : {r.test->accuracy, r.test->precision, r.test->recall, r.test->f1, r.test->auc_macro,
                       r.test->auc_weighted})
        out << ',' << full_precision(v);
      out << ",weighted,";
    } else {
      out << ",,,,,,,," << csv_field(r.error);
    }
    out << "\n";
  }
  return out.str();
}

std::string render(const PipelineResult& result, RenderFormat format) {
  switch (format) {
    case RenderFormat::Text:
      return render_text(result);
    case RenderFormat::Csv:
      return render_csv(result);
    case RenderFormat::Json:
      return to_json(result).dump(2) + "\n";
  }
  return {};
}

std::string distribution_table(const std::vector<std::pair<std::string, ClassDistribution>>& splits) {
  std::ostringstream out;
  out << "| Class | CWE |";
  for (const auto& [name, _] : splits) out << ' ' << name << " |";
  out << "\n|---|---|";
  for (std::size_t i = 0; i < splits.size(); ++i) out << "---|";
  out << "\n";
  for (Label c = 0; c < kNumClasses; ++c) {
    out << "| " << c << " | " << cwe_name(c) << " |";
    for (const auto& [_, d] : splits) out << ' ' << d.counts[static_cast<std::size_t>(c)] << " |";
    out << "\n";
  }
  out << "| Total | |";
  for (const auto& [_, d] : splits) out << ' ' << d.total() << " |";
  out << "\n";
  return out.str();
}

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json timings = nlohmann::json::object();
  for (const auto& [stage, seconds] : m.timings) timings[stage] = seconds;
  return {{"tool", "enstack"},
          {"version", kVersion},
          {"command", m.command},
          {"config_hash", m.config_hash},
          {"seeds", m.seeds},
          {"input_digests", m.input_digests},
          {"timings_seconds", timings},
          {"outputs", m.outputs}};
}

}  // namespace enstack
