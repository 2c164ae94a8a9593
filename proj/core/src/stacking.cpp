#include "enstack/stacking.hpp"

#include "enstack/hash.hpp"
#include "enstack/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <set>
#include <thread>
#include <unordered_map>

namespace enstack {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// meta-features

MetaDataset MetaDataset::subset(std::span<const std::string> names) const {
  std::vector<std::size_t> blocks;
  for (std::size_t k = 0; k < model_order.size(); ++k)
    if (std::find(names.begin(), names.end(), model_order[k]) != names.end()) blocks.push_back(k);
  if (blocks.size() != names.size()) throw ValidationError("subset names a model that is not in the meta-dataset");

  MetaDataset out;
  out.y = y;
  out.ids = ids;
  out.z = Matrix(z.rows(), blocks.size() * kNumClasses);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    out.model_order.push_back(model_order[blocks[b]]);
    for (std::size_t r = 0; r < z.rows(); ++r)
      for (std::size_t c = 0; c < kNumClasses; ++c) out.z(r, b * kNumClasses + c) = z(r, blocks[b] * kNumClasses + c);
  }
  return out;
}

MetaDataset build_meta_features(std::span<const BaseModel> models, const Corpus& corpus, bool with_labels) {
  if (models.empty()) throw ValidationError("meta-features need at least one base model");
  MetaDataset ds;
  ds.z = Matrix(corpus.size(), models.size() * kNumClasses);
  ds.ids = corpus.ids();
  for (std::size_t k = 0; k < models.size(); ++k) {
    ds.model_order.push_back(models[k].name);
    // score_corpus collects every uncovered id before throwing.
    const ProbTable table = score_corpus(models[k], corpus);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const ProbVector& p = *table.find(corpus[i].id);
      std::copy(p.begin(), p.end(), ds.z.row(i).begin() + static_cast<std::ptrdiff_t>(k * kNumClasses));
    }
  }
  if (with_labels) {
    ds.y.reserve(corpus.size());
    for (const auto& s : corpus) {
      if (!s.label) throw ValidationError("sample '" + s.id + "' has no label");
      ds.y.push_back(*s.label);
    }
  }
  return ds;
}

void LabelAudit::record(std::string split, std::string stage) {
  std::lock_guard lock(mutex_);
  events_.push_back({std::move(split), std::move(stage)});
}

std::vector<LabelAudit::Event> LabelAudit::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

// ---------------------------------------------------------------------------
// configuration

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ValidationError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ValidationError("unknown key '" + key + "' in " + std::string(where));
}

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  fs::path path(p);
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  return fs::absolute(path).lexically_normal();
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

meta::MetaParams parse_meta_params(const json& j) {
  reject_unknown(j, {"lr", "rf", "svm", "gbt"}, "meta_params");
  meta::MetaParams p;
  if (j.contains("lr")) {
    const auto& o = j.at("lr");
    reject_unknown(o, {"C", "max_iter", "tol"}, "meta_params.lr");
    read_opt(o, "C", p.lr.C);
    read_opt(o, "max_iter", p.lr.max_iter);
    read_opt(o, "tol", p.lr.tol);
  }
  if (j.contains("rf")) {
    const auto& o = j.at("rf");
    reject_unknown(o, {"n_estimators", "max_depth", "seed"}, "meta_params.rf");
    read_opt(o, "n_estimators", p.rf.n_estimators);
    read_opt(o, "max_depth", p.rf.max_depth);
    read_opt(o, "seed", p.rf.seed);
  }
  if (j.contains("svm")) {
    const auto& o = j.at("svm");
    reject_unknown(o, {"C", "gamma", "tol", "calibration_folds", "seed", "max_iter"}, "meta_params.svm");
    read_opt(o, "C", p.svm.C);
    if (o.contains("gamma") && o.at("gamma").is_number()) p.svm.gamma = o.at("gamma").get<double>();
    else if (o.contains("gamma") && !(o.at("gamma").is_null() || o.at("gamma") == "scale"))
      throw ValidationError("meta_params.svm.gamma must be a number, \"scale\" or null");
    read_opt(o, "tol", p.svm.tol);
    read_opt(o, "calibration_folds", p.svm.calibration_folds);
    read_opt(o, "seed", p.svm.seed);
    read_opt(o, "max_iter", p.svm.max_iter);
  }
  if (j.contains("gbt")) {
    const auto& o = j.at("gbt");
    reject_unknown(o, {"n_estimators", "learning_rate", "max_depth", "lambda", "min_child_weight"}, "meta_params.gbt");
    read_opt(o, "n_estimators", p.gbt.n_estimators);
    read_opt(o, "learning_rate", p.gbt.learning_rate);
    read_opt(o, "max_depth", p.gbt.max_depth);
    read_opt(o, "lambda", p.gbt.lambda);
    read_opt(o, "min_child_weight", p.gbt.min_child_weight);
  }
  return p;
}

json meta_params_json(const meta::MetaParams& p) {
  return {{"lr", {{"C", p.lr.C}, {"max_iter", p.lr.max_iter}, {"tol", p.lr.tol}}},
          {"rf", {{"n_estimators", p.rf.n_estimators}, {"max_depth", p.rf.max_depth}, {"seed", p.rf.seed}}},
          {"svm",
           {{"C", p.svm.C},
            {"gamma", p.svm.gamma ? json(*p.svm.gamma) : json("scale")},
            {"tol", p.svm.tol},
            {"calibration_folds", p.svm.calibration_folds},
            {"seed", p.svm.seed},
            {"max_iter", p.svm.max_iter}}},
          {"gbt",
           {{"n_estimators", p.gbt.n_estimators},
            {"learning_rate", p.gbt.learning_rate},
            {"max_depth", p.gbt.max_depth},
            {"lambda", p.gbt.lambda},
            {"min_child_weight", p.gbt.min_child_weight}}}};
}

BaseModelSpec parse_base_spec(const json& j, const fs::path& base_dir) {
  if (!j.is_object() || !j.contains("name") || !j.contains("kind"))
    throw ValidationError("each base model needs \"name\" and \"kind\"");
  BaseModelSpec spec;
  spec.name = j.at("name").get<std::string>();
  const BaseKind kind = parse_base_kind(j.at("kind").get<std::string>());
  if (kind == BaseKind::External) {
    reject_unknown(j, {"name", "kind", "probs"}, "base model '" + spec.name + "'");
    if (!j.contains("probs")) throw ValidationError("external base model '" + spec.name + "' needs \"probs\"");
    ExternalSpec ext;
    const auto& probs = j.at("probs");
    if (probs.is_string()) ext.probs.push_back(resolve(base_dir, probs.get<std::string>()));
    else
      for (const auto& p : probs) ext.probs.push_back(resolve(base_dir, p.get<std::string>()));
    spec.source = std::move(ext);
  } else {
    reject_unknown(j, {"name", "kind", "dim", "epochs", "learning_rate", "l2", "seed"},
                   "base model '" + spec.name + "'");
    BuiltinSpec b;
    b.kind = kind;
    read_opt(j, "dim", b.train.dim);
    read_opt(j, "epochs", b.train.epochs);
    read_opt(j, "learning_rate", b.train.learning_rate);
    read_opt(j, "l2", b.train.l2);
    read_opt(j, "seed", b.train.seed);
    spec.source = b;
  }
  return spec;
}

json base_spec_json(const BaseModelSpec& spec) {
  if (const auto* ext = std::get_if<ExternalSpec>(&spec.source)) {
    json paths = json::array();
    for (const auto& p : ext->probs) paths.push_back(p.string());
    return {{"name", spec.name}, {"kind", to_string(BaseKind::External)}, {"probs", paths}};
  }
  const auto& b = std::get<BuiltinSpec>(spec.source);
  return {{"name", spec.name},
          {"kind", to_string(b.kind)},
          {"dim", b.train.dim},
          {"epochs", b.train.epochs},
          {"learning_rate", b.train.learning_rate},
          {"l2", b.train.l2},
          {"seed", b.train.seed}};
}

const std::set<std::string_view> kSelectionMetrics{"accuracy", "precision", "recall", "f1",
                                                   "auc",      "auc_macro", "auc_weighted"};

}  // namespace

void PipelineConfig::validate() const {
  if (base_models.empty()) throw ValidationError("config needs at least one base model");
  if (meta_kinds.empty()) throw ValidationError("config needs at least one meta-classifier kind");
  std::set<std::string> names;
  for (const auto& m : base_models) {
    if (m.name.empty()) throw ValidationError("base model name must not be empty");
    if (m.name.find_first_of("+()") != std::string::npos)
      throw ValidationError("base model name '" + m.name + "' must not contain '+', '(' or ')'");
    if (!names.insert(m.name).second) throw ValidationError("duplicate base model name '" + m.name + "'");
    if (const auto* b = std::get_if<BuiltinSpec>(&m.source)) {
      check_feature_dim(b->train.dim);
      if (b->train.epochs < 0) throw ValidationError("epochs must be >= 0");
      if (!(b->train.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    } else if (std::get<ExternalSpec>(m.source).probs.empty()) {
      throw ValidationError("external base model '" + m.name + "' lists no probability files");
    }
  }
  std::set<meta::MetaKind> kinds(meta_kinds.begin(), meta_kinds.end());
  if (kinds.size() != meta_kinds.size()) throw ValidationError("meta_kinds lists a kind twice");
  std::set<std::vector<std::string>> seen;
  for (const auto& s : subsets) {
    if (s.empty()) throw ValidationError("base-model subsets must not be empty");
    std::set<std::string> members;
    for (const auto& n : s) {
      if (!names.count(n)) throw ValidationError("subset names unknown base model '" + n + "'");
      if (!members.insert(n).second) throw ValidationError("subset lists '" + n + "' twice");
    }
    if (!seen.insert(std::vector<std::string>(members.begin(), members.end())).second)
      throw ValidationError("subset listed twice");
  }
  if (!kSelectionMetrics.count(selection_metric))
    throw ValidationError("unknown selection metric '" + selection_metric + "'");
  if (cv_folds < 2) throw ValidationError("cv_folds must be at least 2");
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (!(ratios.train > 0 && ratios.validation > 0 && ratios.test > 0) || std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("ratios must be positive and sum to 1");
  for (auto cap : caps)
    if (cap == 0) throw ValidationError("caps must be at least 1");
}

PipelineConfig parse_pipeline_config(const json& j, const fs::path& base_dir) {
  reject_unknown(j,
                 {"corpus", "splits", "ratios", "caps", "seed", "seeds", "base_models", "meta_kinds", "subsets",
                  "ablation", "selection_metric", "cv_folds", "meta_params", "threads"},
                 "config");
  PipelineConfig cfg;
  try {
    if (j.contains("corpus") == j.contains("splits"))
      throw ValidationError("config needs exactly one of \"corpus\" or \"splits\"");
    if (j.contains("corpus")) {
      const auto& c = j.at("corpus");
      CorpusSource src;
      if (c.is_string()) {
        src.path = resolve(base_dir, c.get<std::string>());
      } else {
        reject_unknown(c, {"path", "format"}, "corpus");
        src.path = resolve(base_dir, c.at("path").get<std::string>());
        if (c.contains("format")) src.format = parse_corpus_format(c.at("format").get<std::string>());
      }
      cfg.data = src;
    } else {
      const auto& s = j.at("splits");
      reject_unknown(s, {"train", "validation", "test"}, "splits");
      cfg.data = PreparedSplits{resolve(base_dir, s.at("train").get<std::string>()),
                                resolve(base_dir, s.at("validation").get<std::string>()),
                                resolve(base_dir, s.at("test").get<std::string>())};
    }
    if (j.contains("ratios")) {
      const auto r = j.at("ratios").get<std::vector<double>>();
      if (r.size() != 3) throw ValidationError("ratios must have three entries");
      cfg.ratios = {r[0], r[1], r[2]};
    }
    if (j.contains("caps") && !j.at("caps").is_null()) {
      const auto& caps = j.at("caps");
      if (!caps.is_array() || caps.size() != kNumClasses) throw ValidationError("caps must list five entries");
      for (std::size_t c = 0; c < kNumClasses; ++c)
        cfg.caps[c] = caps[c].is_null() ? kNoCap : caps[c].get<std::size_t>();
    }
    if (j.contains("seed")) {
      const auto s = j.at("seed").get<std::uint64_t>();
      cfg.seeds = {s, s, s};
    }
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      reject_unknown(s, {"split", "downsample", "cv"}, "seeds");
      read_opt(s, "split", cfg.seeds.split);
      read_opt(s, "downsample", cfg.seeds.downsample);
      read_opt(s, "cv", cfg.seeds.cv);
    }
    if (!j.contains("base_models") || !j.at("base_models").is_array())
      throw ValidationError("config needs a \"base_models\" list");
    for (const auto& b : j.at("base_models")) cfg.base_models.push_back(parse_base_spec(b, base_dir));
    if (j.contains("meta_kinds")) {
      cfg.meta_kinds.clear();
      for (const auto& k : j.at("meta_kinds")) cfg.meta_kinds.push_back(meta::parse_meta_kind(k.get<std::string>()));
    }
    const bool ablation = j.value("ablation", false);
    if (ablation && j.contains("subsets")) throw ValidationError("give either \"subsets\" or \"ablation\", not both");
    if (ablation) cfg.subsets = ablation_subsets(cfg.base_models);
    if (j.contains("subsets")) cfg.subsets = j.at("subsets").get<std::vector<std::vector<std::string>>>();
    read_opt(j, "selection_metric", cfg.selection_metric);
    read_opt(j, "cv_folds", cfg.cv_folds);
    read_opt(j, "threads", cfg.threads);
    if (j.contains("meta_params")) cfg.meta_params = parse_meta_params(j.at("meta_params"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("config not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_pipeline_config(j, fs::absolute(path).parent_path());
}

json to_json(const PipelineConfig& cfg) {
  json j;
  if (const auto* src = std::get_if<CorpusSource>(&cfg.data)) {
    j["corpus"] = {{"path", src->path.string()}, {"format", to_string(src->format)}};
  } else {
    const auto& s = std::get<PreparedSplits>(cfg.data);
    j["splits"] = {{"train", s.train.string()}, {"validation", s.validation.string()}, {"test", s.test.string()}};
  }
  j["ratios"] = {cfg.ratios.train, cfg.ratios.validation, cfg.ratios.test};
  json caps = json::array();
  for (auto c : cfg.caps) caps.push_back(c == kNoCap ? json(nullptr) : json(c));
  j["caps"] = caps;
  j["seeds"] = {{"split", cfg.seeds.split}, {"downsample", cfg.seeds.downsample}, {"cv", cfg.seeds.cv}};
  j["base_models"] = json::array();
  for (const auto& b : cfg.base_models) j["base_models"].push_back(base_spec_json(b));
  j["meta_kinds"] = json::array();
  for (auto k : cfg.meta_kinds) j["meta_kinds"].push_back(meta::to_string(k));
  j["subsets"] = cfg.subsets;
  j["selection_metric"] = cfg.selection_metric;
  j["cv_folds"] = cfg.cv_folds;
  j["meta_params"] = meta_params_json(cfg.meta_params);
  return j;
}

std::string config_hash(const PipelineConfig& config) { return hex64(fnv1a64(to_json(config).dump())); }

std::vector<std::vector<std::string>> ablation_subsets(std::span<const BaseModelSpec> models) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> all;
  for (const auto& m : models) {
    out.push_back({m.name});
    all.push_back(m.name);
  }
  if (models.size() > 1) out.push_back(all);
  return out;
}

namespace {

std::string join_names(std::span<const std::string> subset) {
  std::string s;
  for (std::size_t i = 0; i < subset.size(); ++i) s += (i ? "+" : "") + subset[i];
  return s;
}

}  // namespace

std::string row_key(std::span<const std::string> subset, meta::MetaKind kind) {
  return join_names(subset) + " (" + std::string(meta::to_string(kind)) + ")";
}

std::string row_label(std::span<const std::string> subset, meta::MetaKind kind) {
  return (subset.size() == 1 ? "Stacking " : "Ensemble Stacking ") + row_key(subset, kind);
}

std::size_t select_meta(std::span<const SelectionCandidate> candidates, std::string_view metric) {
  if (candidates.empty()) throw ValidationError("no meta-classifier candidates to select from");
  std::size_t best = 0;
  double best_value = metrics::metric_value(candidates[0].validation, metric);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double v = metrics::metric_value(candidates[i].validation, metric);
    if (v > best_value || (v == best_value && candidates[i].kind < candidates[best].kind)) {
      best = i;
      best_value = v;
    }
  }
  return best;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("file not found: " + path.string());
  std::uint64_t h = kFnvOffset;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    h = fnv1a64(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), h);
  }
  return hex64(h);
}

// ---------------------------------------------------------------------------
// pipeline

namespace {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. fn must not throw.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
  std::size_t workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
  };
  if (workers <= 1) {
    work();
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
}

[[noreturn]] void rethrow_as(const std::string& stage) {
  try {
    throw;
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(stage, e.what());
  }
}

class StageClock {
 public:
  explicit StageClock(PipelineResult& r) : result_(r) {}
  void done(std::string stage) {
    const auto now = std::chrono::steady_clock::now();
    result_.timings.emplace_back(std::move(stage), std::chrono::duration<double>(now - start_).count());
    start_ = now;
  }

 private:
  PipelineResult& result_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::vector<Label> labels_of(const Corpus& corpus, const std::string& split, const std::string& stage,
                             LabelAudit* audit) {
  if (audit) audit->record(split, stage);
  std::vector<Label> y;
  y.reserve(corpus.size());
  for (const auto& s : corpus) y.push_back(*s.label);
  return y;
}

Corpus without_labels(const Corpus& corpus) {
  std::vector<CodeSample> samples(corpus.begin(), corpus.end());
  for (auto& s : samples) s.label.reset();
  return Corpus(std::move(samples), corpus.provenance());
}

Corpus load_split(const fs::path& path) {
  return clean(load_corpus(path, CorpusFormat::Jsonl)).sorted_by_id();
}

struct Prepared {
  Corpus train, validation, test;
};

Prepared prepare(const PipelineConfig& cfg, PipelineResult& result) {
  Prepared p;
  if (const auto* src = std::get_if<CorpusSource>(&cfg.data)) {
    result.input_digests["corpus"] = file_digest(src->path);
    const Corpus corpus = clean(load_corpus(src->path, src->format));
    SplitSet split = stratified_split(corpus, cfg.ratios, cfg.seeds.split);
    p.train = std::move(split.train);
    p.validation = std::move(split.validation);
    p.test = std::move(split.test);
  } else {
    const auto& s = std::get<PreparedSplits>(cfg.data);
    result.input_digests["train"] = file_digest(s.train);
    result.input_digests["validation"] = file_digest(s.validation);
    result.input_digests["test"] = file_digest(s.test);
    p.train = load_split(s.train);
    p.validation = load_split(s.validation);
    p.test = load_split(s.test);
    std::set<std::string> seen;
    for (const Corpus* c : {&p.train, &p.validation, &p.test})
      for (const auto& sample : *c)
        if (!seen.insert(sample.id).second)
          throw ValidationError("id '" + sample.id + "' appears in more than one split");
  }
  p.train = downsample(p.train, cfg.caps, cfg.seeds.downsample).sorted_by_id();
  for (const auto& [name, corpus] : {std::pair{"train", &p.train}, {"validation", &p.validation}, {"test", &p.test}}) {
    if (corpus->empty()) throw ValidationError(std::string(name) + " split is empty");
    result.split_distributions[name] = corpus->distribution();
  }
  return p;
}

std::vector<BaseModel> train_bases(const PipelineConfig& cfg, const Corpus& train, PipelineResult& result,
                                   LabelAudit* audit) {
  const std::size_t k = cfg.base_models.size();
  for (std::size_t m = 0; m < k; ++m)
    if (const auto* ext = std::get_if<ExternalSpec>(&cfg.base_models[m].source))
      for (std::size_t f = 0; f < ext->probs.size(); ++f)
        result.input_digests["probs:" + cfg.base_models[m].name + ":" + std::to_string(f)] =
            file_digest(ext->probs[f]);
  if (audit) audit->record("train", "train_base");

  std::vector<std::optional<BaseModel>> models(k);
  std::vector<std::exception_ptr> errors(k);
  parallel_for(k, cfg.threads, [&](std::size_t m) {
    const auto& spec = cfg.base_models[m];
    try {
      if (const auto* b = std::get_if<BuiltinSpec>(&spec.source)) {
        models[m] = train_builtin(b->kind, train, b->train, spec.name);
      } else {
        auto table = std::make_shared<ProbTable>(spec.name);
        for (const auto& path : std::get<ExternalSpec>(spec.source).probs) table->merge(load_external_probs(path));
        models[m] = external_model(spec.name, std::move(table));
      }
    } catch (...) {
      errors[m] = std::current_exception();
    }
  });
  for (std::size_t m = 0; m < k; ++m)
    if (errors[m]) {
      try {
        std::rethrow_exception(errors[m]);
      } catch (const std::exception& e) {
        throw PipelineError("train_base", "base model '" + cfg.base_models[m].name + "': " + e.what());
      }
    }
  std::vector<BaseModel> out;
  for (auto& m : models) out.push_back(std::move(*m));
  return out;
}

/// Stratified fold id per row: each class is shuffled on its own stream and
/// dealt round-robin, continuing where the previous class stopped.
std::vector<int> stratified_folds(std::span<const Label> y, int k, std::uint64_t seed) {
  std::vector<int> fold(y.size(), 0);
  std::size_t offset = 0;
  for (Label c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == c) rows.push_back(i);
    SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    rng.shuffle(std::span(rows));
    for (std::size_t i = 0; i < rows.size(); ++i) fold[rows[i]] = static_cast<int>((offset + i) % k);
    offset += rows.size();
  }
  return fold;
}

Matrix out_of_fold(meta::MetaKind kind, const MetaDataset& ds, std::span<const int> fold, int k,
                   const meta::MetaParams& params) {
  Matrix oof(ds.z.rows(), kNumClasses);
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> train_rows, held_rows;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? held_rows : train_rows).push_back(i);
    if (held_rows.empty()) continue;
    std::vector<Label> y_train;
    for (auto i : train_rows) y_train.push_back(ds.y[i]);
    const auto model = meta::fit(kind, ds.z.select_rows(train_rows), y_train, params);
    const Matrix probs = model.predict_proba(ds.z.select_rows(held_rows));
    for (std::size_t r = 0; r < held_rows.size(); ++r)
      std::copy(probs.row(r).begin(), probs.row(r).end(), oof.row(held_rows[r]).begin());
  }
  return oof;
}

struct Cell {
  StackRow row;
  std::optional<meta::MetaModel> model;
  Matrix test_probs;
};

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, const PipelineOptions& options) {
  PipelineResult result;
  LabelAudit* audit = options.audit;
  try {
    config.validate();
  } catch (...) {
    rethrow_as("config");
  }
  result.config = to_json(config);
  result.config_hash = config_hash(config);
  result.seeds = config.seeds;
  result.selection_metric = config.selection_metric;
  result.cv_folds = config.cv_folds;
  for (const auto& m : config.base_models) result.model_order.push_back(m.name);

  // Subsets in declaration order so concatenation order is fixed by the config.
  std::vector<std::vector<std::string>> subsets;
  const auto requested = config.subsets.empty() ? std::vector<std::vector<std::string>>{result.model_order} : config.subsets;
  for (const auto& s : requested) {
    std::vector<std::string> ordered;
    for (const auto& name : result.model_order)
      if (std::find(s.begin(), s.end(), name) != s.end()) ordered.push_back(name);
    subsets.push_back(std::move(ordered));
  }

  StageClock clock(result);
  Prepared data;
  try {
    data = prepare(config, result);
  } catch (...) {
    rethrow_as("prepare");
  }
  clock.done("prepare");

  std::vector<BaseModel> bases;
  try {
    bases = train_bases(config, data.train, result, audit);
  } catch (...) {
    rethrow_as("train_base");
  }
  clock.done("train_base");

  MetaDataset val, test;
  try {
    if (audit) audit->record("validation", "meta_features");
    val = build_meta_features(bases, data.validation, true);
    test = build_meta_features(bases, without_labels(data.test), false);
    if (val.z.rows() < static_cast<std::size_t>(config.cv_folds))
      throw ValidationError("validation split has fewer rows than cv_folds");
  } catch (...) {
    rethrow_as("meta_features");
  }
  clock.done("meta_features");

  const std::size_t n_kinds = config.meta_kinds.size();
  std::vector<Cell> cells(subsets.size() * n_kinds);
  try {
    const auto folds = stratified_folds(val.y, config.cv_folds, config.seeds.cv);
    parallel_for(cells.size(), config.threads, [&](std::size_t idx) {
      const auto& subset = subsets[idx / n_kinds];
      const auto kind = config.meta_kinds[idx % n_kinds];
      Cell& cell = cells[idx];
      cell.row.key = row_key(subset, kind);
      cell.row.label = row_label(subset, kind);
      cell.row.subset = subset;
      cell.row.kind = kind;
      try {
        const MetaDataset v = val.subset(subset);
        const Matrix oof = out_of_fold(kind, v, folds, config.cv_folds, config.meta_params);
        cell.row.validation = metrics::evaluate(v.y, oof, cell.row.key, true);
        cell.model = meta::fit(kind, v.z, v.y, config.meta_params);
        cell.test_probs = cell.model->predict_proba(test.subset(subset).z);
      } catch (const std::exception& e) {
        cell.row.validation.reset();
        cell.model.reset();
        cell.row.error = e.what();
      }
    });
  } catch (...) {
    rethrow_as("fit_meta");
  }
  clock.done("fit_meta");

  std::size_t primary = 0;
  for (std::size_t s = 0; s < subsets.size(); ++s)
    if (subsets[s].size() > subsets[primary].size()) primary = s;
  try {
    for (std::size_t s = 0; s < subsets.size(); ++s) {
      std::vector<SelectionCandidate> candidates;
      std::vector<std::size_t> cell_index;
      for (std::size_t k = 0; k < n_kinds; ++k) {
        const Cell& cell = cells[s * n_kinds + k];
        if (!cell.row.validation) continue;
        candidates.push_back({cell.row.kind, *cell.row.validation});
        cell_index.push_back(s * n_kinds + k);
      }
      if (candidates.empty()) {
        std::string why;
        for (std::size_t k = 0; k < n_kinds; ++k) why += "; " + cells[s * n_kinds + k].row.key + ": " + cells[s * n_kinds + k].row.error;
        throw Error("every meta-classifier failed for subset " + join_names(subsets[s]) + why);
      }
      const Cell& winner = cells[cell_index[select_meta(candidates, config.selection_metric)]];
      result.selections.push_back({subsets[s], winner.row.key});
      if (s == primary) {
        result.selected = winner.row.key;
        result.selected_model = winner.model;
      }
    }
  } catch (...) {
    rethrow_as("select");
  }
  clock.done("select");

  // Every fit is done; only now are test labels read.
  try {
    const auto y_test = labels_of(data.test, "test", "evaluate", audit);
    for (std::size_t k = 0; k < bases.size(); ++k) {
      IndividualRow row;
      row.name = bases[k].name;
      row.validation = metrics::evaluate(val.y, val.z.select_cols(k * kNumClasses, kNumClasses), row.name, true);
      row.test = metrics::evaluate(y_test, test.z.select_cols(k * kNumClasses, kNumClasses), row.name, true);
      result.individual.push_back(std::move(row));
    }
    for (auto& cell : cells) {
      if (cell.model) cell.row.test = metrics::evaluate(y_test, cell.test_probs, cell.row.key, true);
      result.rows.push_back(std::move(cell.row));
    }
  } catch (...) {
    rethrow_as("evaluate");
  }
  clock.done("evaluate");
  return result;
}

PipelineResult ablation_sweep(PipelineConfig config, const PipelineOptions& options) {
  if (config.subsets.empty()) config.subsets = ablation_subsets(config.base_models);
  return run_pipeline(config, options);
}

// ---------------------------------------------------------------------------
// serialization

json to_json(const PipelineResult& r) {
  json j;
  j["schema_version"] = 1;
  j["config"] = r.config;
  j["config_hash"] = r.config_hash;
  j["seeds"] = {{"split", r.seeds.split}, {"downsample", r.seeds.downsample}, {"cv", r.seeds.cv}};
  j["selection_metric"] = r.selection_metric;
  j["cv_folds"] = r.cv_folds;
  j["model_order"] = r.model_order;
  j["input_digests"] = r.input_digests;
  json dist = json::object();
  for (const auto& [name, d] : r.split_distributions) dist[name] = d.counts;
  j["split_distributions"] = dist;
  j["individual"] = json::array();
  for (const auto& row : r.individual)
    j["individual"].push_back(
        {{"name", row.name}, {"validation", metrics::to_json(row.validation)}, {"test", metrics::to_json(row.test)}});
  j["rows"] = json::array();
  for (const auto& row : r.rows)
    j["rows"].push_back({{"key", row.key},
                         {"label", row.label},
                         {"subset", row.subset},
                         {"kind", meta::to_string(row.kind)},
                         {"validation", row.validation ? metrics::to_json(*row.validation) : json(nullptr)},
                         {"test", row.test ? metrics::to_json(*row.test) : json(nullptr)},
                         {"error", row.error}});
  j["selections"] = json::array();
  for (const auto& s : r.selections) j["selections"].push_back({{"subset", s.subset}, {"selected", s.selected_key}});
  j["selected"] = r.selected;
  return j;
}

PipelineResult result_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("result must be a JSON object");
  try {
    PipelineResult r;
    r.config = j.value("config", json::object());
    r.config_hash = j.value("config_hash", "");
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      r.seeds = {s.at("split").get<std::uint64_t>(), s.at("downsample").get<std::uint64_t>(),
                 s.at("cv").get<std::uint64_t>()};
    }
    r.selection_metric = j.value("selection_metric", "accuracy");
    r.cv_folds = j.value("cv_folds", 5);
    r.model_order = j.value("model_order", std::vector<std::string>{});
    r.input_digests = j.value("input_digests", std::map<std::string, std::string>{});
    if (j.contains("split_distributions"))
      for (const auto& [name, counts] : j.at("split_distributions").items())
        r.split_distributions[name].counts = counts.get<decltype(ClassDistribution::counts)>();
    for (const auto& row : j.value("individual", json::array()))
      r.individual.push_back({row.at("name").get<std::string>(), metrics::report_from_json(row.at("validation")),
                              metrics::report_from_json(row.at("test"))});
    for (const auto& row : j.value("rows", json::array())) {
      StackRow s;
      s.key = row.at("key").get<std::string>();
      s.label = row.at("label").get<std::string>();
      s.subset = row.at("subset").get<std::vector<std::string>>();
      s.kind = meta::parse_meta_kind(row.at("kind").get<std::string>());
      if (!row.at("validation").is_null()) s.validation = metrics::report_from_json(row.at("validation"));
      if (!row.at("test").is_null()) s.test = metrics::report_from_json(row.at("test"));
      s.error = row.value("error", "");
      r.rows.push_back(std::move(s));
    }
    for (const auto& s : j.value("selections", json::array()))
      r.selections.push_back({s.at("subset").get<std::vector<std::string>>(), s.at("selected").get<std::string>()});
    r.selected = j.value("selected", "");
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed pipeline result: ") + e.what());
  }
}

}  // namespace enstack
