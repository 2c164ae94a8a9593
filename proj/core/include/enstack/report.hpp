#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "enstack/corpus.hpp"
#include "enstack/stacking.hpp"

namespace enstack {

enum class RenderFormat { Text, Json, Csv };

RenderFormat parse_render_format(std::string_view name);

/// Text: three sections (individual models, stacking on one base model,
/// ensemble stacking) with test-set percentages at two decimals; '*' marks
/// the best value of each column. CSV: one row per configuration. JSON: the
/// serialized result. A result without rows renders as "no rows".
std::string render(const PipelineResult& result, RenderFormat format);

std::string render_text(const PipelineResult& result);
std::string render_csv(const PipelineResult& result);

/// Per-class counts for each named split plus a total row.
std::string distribution_table(const std::vector<std::pair<std::string, ClassDistribution>>& splits);

/// Written next to every set of run outputs.
struct RunManifest {
  std::string command;
  std::string config_hash;
  nlohmann::json seeds = nlohmann::json::object();
  std::map<std::string, std::string> input_digests;
  std::vector<std::pair<std::string, double>> timings;
  std::vector<std::string> outputs;
};

nlohmann::json to_json(const RunManifest& manifest);

}  // namespace enstack
