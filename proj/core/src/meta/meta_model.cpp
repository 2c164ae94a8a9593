#include "enstack/meta/meta_model.hpp"

#include "enstack/error.hpp"

namespace enstack::meta {

std::size_t MetaModel::input_dim() const {
  return std::visit([](const auto& m) { return m.cols(); }, impl_);
}

Matrix MetaModel::predict_proba(const Matrix& x) const {
  return std::visit([&](const auto& m) { return m.predict_proba(x); }, impl_);
}

std::vector<Label> MetaModel::predict(const Matrix& x) const { return argmax_rows(predict_proba(x)); }

nlohmann::json MetaModel::to_json() const {
  nlohmann::json j = std::visit([](const auto& m) { return m.to_json(); }, impl_);
  j["schema_version"] = kMetaSchemaVersion;
  j["kind"] = to_string(kind());
  return j;
}

MetaModel MetaModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kMetaSchemaVersion)
      throw FormatError("unsupported meta-model schema version");
    switch (parse_meta_kind(j.at("kind").get<std::string>())) {
      case MetaKind::LR: return MetaModel(LogisticModel::from_json(j));
      case MetaKind::RF: return MetaModel(ForestModel::from_json(j));
      case MetaKind::SVM: return MetaModel(SvmModel::from_json(j));
      case MetaKind::GBT: return MetaModel(BoostModel::from_json(j));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed meta-model document: ") + e.what());
  }
  throw FormatError("unknown meta-model kind");
}

MetaModel fit(MetaKind kind, const Matrix& x, std::span<const Label> y, const MetaParams& params) {
  switch (kind) {
    case MetaKind::LR: return MetaModel(LogisticModel::fit(x, y, params.lr));
    case MetaKind::RF: return MetaModel(ForestModel::fit(x, y, params.rf));
    case MetaKind::SVM: return MetaModel(SvmModel::fit(x, y, params.svm));
    case MetaKind::GBT: return MetaModel(BoostModel::fit(x, y, params.gbt));
  }
  throw ValidationError("unknown meta-classifier kind");
}

}  // namespace enstack::meta
