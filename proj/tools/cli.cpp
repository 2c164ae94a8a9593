#include "cli.hpp"

#include <CLI11.hpp>

#include <enstack/corpus.hpp>
#include <enstack/error.hpp>
#include <enstack/hash.hpp>
#include <enstack/report.hpp>
#include <enstack/stacking.hpp>
#include <enstack/version.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace enstack::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// A failure that maps to a specific exit code.
struct Exit {
  int code;
  std::string message;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) parts.push_back(item);
  return parts;
}

SplitRatios parse_ratios(const std::string& text) {
  const auto parts = split_list(text);
  if (parts.size() != 3) throw Exit{kExitUsage, "--ratios needs three comma-separated fractions"};
  try {
    return {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
  } catch (const std::exception&) {
    throw Exit{kExitUsage, "--ratios: not a number in '" + text + "'"};
  }
}

/// Five integers; "-" leaves a class uncapped.
ClassCaps parse_caps(const std::string& text) {
  const auto parts = split_list(text);
  if (parts.size() != kNumClasses) throw Exit{kExitUsage, "--caps needs five comma-separated counts"};
  ClassCaps caps = kUncapped;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (parts[c] == "-") continue;
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(parts[c], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != parts[c].size() || v < 1) throw Exit{kExitUsage, "--caps entries must be integers >= 1 or '-'"};
    caps[c] = static_cast<std::size_t>(v);
  }
  return caps;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Exit{kExitPipeline, "cannot write " + path.string()};
  out << text;
}

/// File-name-safe form of a row key: "C+G (LR)" -> "C+G_LR".
std::string file_stem(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == ' ') out += '_';
    else if (c != '(' && c != ')' && c != '/' && c != '\\') out += c;
  }
  return out;
}

struct PrepareArgs {
  std::string corpus;
  std::string format = "jsonl";
  std::string ratios = "0.8,0.1,0.1";
  std::string caps;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const SplitRatios ratios = parse_ratios(a.ratios);
  const ClassCaps caps = a.caps.empty() ? kUncapped : parse_caps(a.caps);
  CorpusFormat format;
  try {
    format = parse_corpus_format(a.format);
  } catch (const Error& e) {
    throw Exit{kExitUsage, e.what()};
  }

  Corpus corpus;
  try {
    corpus = clean(load_corpus(a.corpus, format));
  } catch (const NotFoundError& e) {
    throw Exit{kExitUsage, e.what()};
  } catch (const Error& e) {
    throw Exit{kExitUsage, std::string("corpus: ") + e.what()};
  }
  SplitSet split;
  try {
    split = stratified_split(corpus, ratios, a.seed);
    split.train = downsample(split.train, caps, a.seed);
  } catch (const ValidationError& e) {
    throw Exit{kExitUsage, e.what()};
  } catch (const Error& e) {
    throw Exit{kExitPipeline, std::string("split: ") + e.what()};
  }

  const fs::path dir(a.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Exit{kExitPipeline, "cannot create " + dir.string() + ": " + ec.message()};
  write_jsonl(split.train, dir / "train.jsonl");
  write_jsonl(split.validation, dir / "validation.jsonl");
  write_jsonl(split.test, dir / "test.jsonl");
  json manifest = split_manifest(split);
  manifest["caps"] = json::array();
  for (auto c : caps) manifest["caps"].push_back(c == kNoCap ? json(nullptr) : json(c));
  write_text(dir / "split_manifest.json", manifest.dump(2) + "\n");

  const std::string table = distribution_table({{"Train", split.train.distribution()},
                                                {"Validation", split.validation.distribution()},
                                                {"Test", split.test.distribution()}});
  write_text(dir / "distribution.md", table);
  out << table;

  RunManifest run;
  run.command = "prepare";
  run.config_hash = hex64(fnv1a64(manifest.dump()));
  run.seeds = {{"split", a.seed}, {"downsample", a.seed}};
  run.input_digests["corpus"] = file_digest(a.corpus);
  run.timings.emplace_back("prepare",
                           std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  run.outputs = {"train.jsonl", "validation.jsonl", "test.jsonl", "split_manifest.json", "distribution.md"};
  write_text(dir / "run_manifest.json", to_json(run).dump(2) + "\n");
  return kExitOk;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, std::ostream& out) {
  PipelineConfig config;
  try {
    config = load_pipeline_config(config_path);
  } catch (const Error& e) {
    throw Exit{kExitUsage, std::string("config: ") + e.what()};
  }

  PipelineResult result;
  try {
    result = run_pipeline(config);
  } catch (const PipelineError& e) {
    throw Exit{kExitPipeline, std::string("pipeline stage ") + e.what()};
  }

  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir / "reports", ec);
  if (ec) throw Exit{kExitPipeline, "cannot create " + dir.string() + ": " + ec.message()};

  RunManifest run;
  run.command = "run";
  write_text(dir / "result.json", to_json(result).dump(2) + "\n");
  run.outputs.push_back("result.json");
  for (const auto& row : result.individual) {
    const std::string name = "reports/individual_" + file_stem(row.name) + ".json";
    write_text(dir / name, json{{"validation", metrics::to_json(row.validation)}, {"test", metrics::to_json(row.test)}}
                                   .dump(2) + "\n");
    run.outputs.push_back(name);
  }
  for (const auto& row : result.rows) {
    const std::string name = "reports/stack_" + file_stem(row.key) + ".json";
    write_text(dir / name, json{{"label", row.label},
                                {"validation", row.validation ? metrics::to_json(*row.validation) : json(nullptr)},
                                {"test", row.test ? metrics::to_json(*row.test) : json(nullptr)},
                                {"error", row.error}}
                                   .dump(2) + "\n");
    run.outputs.push_back(name);
  }
  if (result.selected_model) {
    write_text(dir / "selected_model.json", result.selected_model->to_json().dump() + "\n");
    run.outputs.push_back("selected_model.json");
  }
  const std::string table = render_text(result);
  write_text(dir / "report.txt", table);
  run.outputs.push_back("report.txt");
  write_text(dir / "config.json", result.config.dump(2) + "\n");
  run.outputs.push_back("config.json");

  run.config_hash = result.config_hash;
  run.seeds = result.config.at("seeds");
  run.input_digests = result.input_digests;
  run.timings = result.timings;
  write_text(dir / "run_manifest.json", to_json(run).dump(2) + "\n");
  out << table;
  return kExitOk;
}

int cmd_report(const std::string& path, const std::string& render_name, std::ostream& out) {
  RenderFormat format;
  try {
    format = parse_render_format(render_name);
  } catch (const Error& e) {
    throw Exit{kExitUsage, e.what()};
  }
  std::ifstream in(path);
  if (!in) throw Exit{kExitUsage, "result not found: " + path};
  PipelineResult result;
  try {
    result = result_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Exit{kExitUsage, std::string("malformed result file: ") + e.what()};
  } catch (const Error& e) {
    throw Exit{kExitUsage, e.what()};
  }
  out << render(result, format);
  return kExitOk;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ensemble stacking for five-class CWE vulnerability detection", "enstack"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Clean, split and downsample a labeled corpus");
  prepare->add_option("--corpus", prep.corpus, "Corpus file")->required();
  prepare->add_option("--format", prep.format, "jsonl or csv")->capture_default_str();
  prepare->add_option("--ratios", prep.ratios, "train,validation,test fractions")->capture_default_str();
  prepare->add_option("--caps", prep.caps, "Per-class training caps c0,..,c4 ('-' = uncapped)");
  prepare->add_option("--seed", prep.seed, "Split and downsample seed")->capture_default_str();
  prepare->add_option("--out", prep.out, "Output directory")->required();

  std::string config_path, run_out;
  auto* run_cmd = app.add_subcommand("run", "Train base models, fit and select meta-classifiers, evaluate");
  run_cmd->add_option("--config", config_path, "Pipeline config JSON")->required();
  run_cmd->add_option("--out", run_out, "Output directory")->required();

  std::string result_path, render_name = "text";
  auto* report = app.add_subcommand("report", "Render a pipeline result");
  report->add_option("result", result_path, "result.json from `enstack run`")->required();
  report->add_option("--render", render_name, "text, json or csv")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*prepare) return cmd_prepare(prep, out);
    if (*run_cmd) return cmd_run(config_path, run_out, out);
    return cmd_report(result_path, render_name, out);
  } catch (const Exit& e) {
    err << "error: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitPipeline;
  }
}

}  // namespace enstack::cli
