#include "enstack/base_model.hpp"

#include "enstack/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace enstack {

Label argmax(std::span<const double> probs) {
  Label best = 0;
  for (std::size_t c = 1; c < probs.size(); ++c)
    if (probs[c] > probs[static_cast<std::size_t>(best)]) best = static_cast<Label>(c);
  return best;
}

// ---------------------------------------------------------------------------
// ProbTable

namespace {

ProbVector validated(const std::string& id, ProbVector p, std::size_t line) {
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v)) throw FormatError("row '" + id + "': non-finite probability", line);
    if (v < 0.0) throw FormatError("row '" + id + "': negative probability", line);
    sum += v;
  }
  if (std::abs(sum - 1.0) > kRenormTolerance) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", sum);
    throw FormatError("row '" + id + "': probabilities sum to " + buf + ", not 1", line);
  }
  if (sum != 1.0)
    for (double& v : p) v /= sum;
  return p;
}

}  // namespace

void ProbTable::insert(std::string id, const ProbVector& probs) {
  const auto p = validated(id, probs, 0);
  if (rows_.count(id)) throw FormatError("duplicate id '" + id + "' in probability table '" + model_ + "'");
  order_.push_back(id);
  rows_.emplace(std::move(id), p);
}

const ProbVector* ProbTable::find(std::string_view id) const {
  const auto it = rows_.find(std::string(id));
  return it == rows_.end() ? nullptr : &it->second;
}

void ProbTable::merge(const ProbTable& other) {
  for (const auto& id : other.order_) insert(id, other.rows_.at(id));
}

ProbTable parse_external_probs(std::istream& in) {
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  ProbTable table;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("malformed JSON: ") + e.what(), line);
    }
    if (!rec.is_object()) throw FormatError("line is not a JSON object", line);
    if (!have_header) {
      if (!rec.contains("model") || !rec["model"].is_string())
        throw FormatError("header must carry a string 'model'", line);
      if (!rec.contains("classes") || rec["classes"] != kNumClasses)
        throw FormatError("header must declare \"classes\": 5", line);
      table = ProbTable(rec["model"].get<std::string>());
      have_header = true;
      continue;
    }
    if (!rec.contains("id") || !rec["id"].is_string()) throw FormatError("row needs a string 'id'", line);
    const auto id = rec["id"].get<std::string>();
    const auto& probs = rec.contains("probs") ? rec["probs"] : nlohmann::json();
    if (!probs.is_array() || probs.size() != kNumClasses)
      throw FormatError("row '" + id + "': 'probs' must be an array of 5 numbers", line);
    ProbVector p{};
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (!probs[c].is_number()) throw FormatError("row '" + id + "': non-numeric probability", line);
      p[c] = probs[c].get<double>();
    }
    if (table.find(id)) throw FormatError("duplicate id '" + id + "'", line);
    table.insert(id, validated(id, p, line));
  }
  if (!have_header) throw FormatError("missing header line {\"model\": ..., \"classes\": 5}");
  return table;
}

ProbTable load_external_probs(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw NotFoundError("probability file not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  try {
    return parse_external_probs(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_probs(const ProbTable& table, std::ostream& out) {
  out << nlohmann::json{{"model", table.model()}, {"classes", kNumClasses}}.dump() << '\n';
  char buf[32];
  for (const auto& id : table.ids()) {
    const auto& p = *table.find(id);
    out << "{\"id\":" << nlohmann::json(id).dump() << ",\"probs\":[";
    for (std::size_t c = 0; c < p.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", p[c]);
      out << (c ? "," : "") << buf;
    }
    out << "]}\n";
  }
}

// ---------------------------------------------------------------------------
// Base models

BaseKind parse_base_kind(std::string_view name) {
  if (name == "hashed-token-softmax") return BaseKind::HashedTokenSoftmax;
  if (name == "char-ngram-softmax") return BaseKind::CharNgramSoftmax;
  if (name == "external") return BaseKind::External;
  throw ValidationError("unknown base model kind '" + std::string(name) + "'");
}

std::string_view to_string(BaseKind kind) {
  switch (kind) {
    case BaseKind::HashedTokenSoftmax: return "hashed-token-softmax";
    case BaseKind::CharNgramSoftmax: return "char-ngram-softmax";
    case BaseKind::External: return "external";
  }
  return "external";
}

FeatureVector featurize_code(BaseKind kind, std::string_view code, std::uint32_t dim) {
  const auto tokens = tokenize(code);
  switch (kind) {
    case BaseKind::HashedTokenSoftmax: return featurize(tokens, dim);
    case BaseKind::CharNgramSoftmax: return featurize_char_ngrams(tokens, dim);
    case BaseKind::External: break;
  }
  throw ValidationError("external models have no feature map");
}

namespace {

using Scores = std::array<double, kNumClasses>;

double log_sum_exp(const Scores& s) {
  const double m = *std::max_element(s.begin(), s.end());
  double acc = 0.0;
  for (double v : s) acc += std::exp(v - m);
  return m + std::log(acc);
}

ProbVector softmax(const Scores& s) {
  const double m = *std::max_element(s.begin(), s.end());
  ProbVector p{};
  double sum = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) sum += (p[c] = std::exp(s[c] - m));
  for (double& v : p) v /= sum;
  return p;
}

double dot(const SoftmaxWeights& w, std::size_t c, const FeatureVector& x) {
  const double* row = w.weights.data() + c * w.dim;
  double acc = 0.0;
  for (const auto& [j, v] : x.entries) acc += row[j] * v;
  return acc;
}

Scores scores_of(const SoftmaxWeights& w, const FeatureVector& x) {
  Scores s{};
  for (std::size_t c = 0; c < s.size(); ++c) s[c] = dot(w, c, x) + w.bias[c];
  return s;
}

}  // namespace

BaseModel untrained_builtin(BaseKind kind, std::uint32_t dim, std::string name) {
  if (kind == BaseKind::External) throw ValidationError("external models cannot be trained");
  check_feature_dim(dim);
  SoftmaxWeights w;
  w.dim = dim;
  w.weights.assign(static_cast<std::size_t>(kNumClasses) * dim, 0.0);
  return BaseModel{std::move(name), kind, std::move(w)};
}

BaseModel train_builtin(BaseKind kind, const Corpus& train, const SoftmaxTrainConfig& config,
                        std::string name) {
  if (config.epochs < 0) throw ValidationError("epochs must be >= 0");
  if (!(config.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(config.l2 >= 0.0)) throw ValidationError("l2 penalty must be >= 0");
  BaseModel model = untrained_builtin(kind, config.dim, std::move(name));
  auto& w = std::get<SoftmaxWeights>(model.params);

  const std::size_t n = train.size();
  std::vector<FeatureVector> xs;
  std::vector<std::size_t> ys;
  xs.reserve(n);
  ys.reserve(n);
  std::array<bool, kNumClasses> seen{};
  for (const auto& s : train) {
    if (!s.label) throw ValidationError("training sample '" + s.id + "' has no label");
    xs.push_back(featurize_code(kind, s.code, config.dim));
    ys.push_back(static_cast<std::size_t>(*s.label));
    seen[ys.back()] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 2)
    throw DegenerateError("training corpus must contain at least two distinct labels");

  const double inv_n = 1.0 / static_cast<double>(n);
  const double lambda = config.l2;
  std::vector<Scores> s(n);
  std::vector<Scores> gx(n);
  std::vector<double> grad_w(w.weights.size());

  auto cross_entropy = [&](double step) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Scores t;
      for (std::size_t c = 0; c < t.size(); ++c) t[c] = s[i][c] - step * gx[i][c];
      acc += log_sum_exp(t) - t[ys[i]];
    }
    return acc * inv_n;
  };

  for (std::size_t i = 0; i < n; ++i) s[i] = scores_of(w, xs[i]);
  double weight_sq = 0.0;
  double ce = cross_entropy(0.0);
  w.loss_history.push_back(ce);
  w.objective_history.push_back(ce);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    Scores grad_b{};
    for (std::size_t i = 0; i < n; ++i) {
      auto r = softmax(s[i]);
      r[ys[i]] -= 1.0;
      for (std::size_t c = 0; c < r.size(); ++c) {
        const double rc = r[c] * inv_n;
        grad_b[c] += rc;
        double* g = grad_w.data() + c * w.dim;
        for (const auto& [j, v] : xs[i].entries) g[j] += rc * v;
      }
    }
    double w_dot_g = 0.0;
    double g_sq = 0.0;
    for (std::size_t k = 0; k < grad_w.size(); ++k) {
      grad_w[k] += lambda * w.weights[k];
      w_dot_g += w.weights[k] * grad_w[k];
      g_sq += grad_w[k] * grad_w[k];
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double* g = grad_w.data() + c * w.dim;
        double acc = grad_b[c];
        for (const auto& [j, v] : xs[i].entries) acc += g[j] * v;
        gx[i][c] = acc;
      }

    const double objective = ce + 0.5 * lambda * weight_sq;
    double step = config.learning_rate;
    bool accepted = false;
    double trial_ce = ce;
    double trial_sq = weight_sq;
    for (int halving = 0; halving < 50; ++halving, step *= 0.5) {
      trial_ce = cross_entropy(step);
      trial_sq = std::max(0.0, weight_sq - 2.0 * step * w_dot_g + step * step * g_sq);
      if (trial_ce <= ce && trial_ce + 0.5 * lambda * trial_sq <= objective) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no descent left at machine precision

    for (std::size_t k = 0; k < grad_w.size(); ++k) w.weights[k] -= step * grad_w[k];
    for (std::size_t c = 0; c < kNumClasses; ++c) w.bias[c] -= step * grad_b[c];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < kNumClasses; ++c) s[i][c] -= step * gx[i][c];
    ce = trial_ce;
    weight_sq = trial_sq;
    w.loss_history.push_back(ce);
    w.objective_history.push_back(ce + 0.5 * lambda * weight_sq);
  }
  return model;
}

BaseModel external_model(std::string name, std::shared_ptr<const ProbTable> table) {
  if (!table) throw ValidationError("external model '" + name + "' has no probability table");
  return BaseModel{std::move(name), BaseKind::External, std::move(table)};
}

ProbVector predict_proba_base(const BaseModel& model, const CodeSample& sample) {
  if (const auto* table = std::get_if<std::shared_ptr<const ProbTable>>(&model.params)) {
    const auto* row = (*table)->find(sample.id);
    if (!row) throw CoverageError(model.name, {sample.id});
    return *row;
  }
  const auto& w = std::get<SoftmaxWeights>(model.params);
  return softmax(scores_of(w, featurize_code(model.kind, sample.code, w.dim)));
}

ProbTable score_corpus(const BaseModel& model, const Corpus& corpus) {
  ProbTable table(model.name);
  std::vector<std::string> missing;
  for (const auto& s : corpus) {
    try {
      table.insert(s.id, predict_proba_base(model, s));
    } catch (const CoverageError&) {
      missing.push_back(s.id);
    }
  }
  if (!missing.empty()) throw CoverageError(model.name, std::move(missing));
  return table;
}

}  // namespace enstack
