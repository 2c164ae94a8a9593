#include "enstack/meta/common.hpp"

#include "enstack/base_model.hpp"
#include "enstack/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace enstack::meta {

std::string_view to_string(MetaKind kind) {
  switch (kind) {
    case MetaKind::LR: return "LR";
    case MetaKind::RF: return "RF";
    case MetaKind::SVM: return "SVM";
    case MetaKind::GBT: return "XGBoost";
  }
  return "LR";
}

MetaKind parse_meta_kind(std::string_view name) {
  if (name == "LR") return MetaKind::LR;
  if (name == "RF") return MetaKind::RF;
  if (name == "SVM") return MetaKind::SVM;
  if (name == "XGBoost" || name == "GBT") return MetaKind::GBT;
  throw ValidationError("unknown meta-classifier kind '" + std::string(name) + "'");
}

void check_features(const Matrix& x, std::size_t cols) {
  if (x.cols() != cols)
    throw DimensionError("feature matrix has " + std::to_string(x.cols()) + " columns, model expects " +
                         std::to_string(cols));
  if (!std::all_of(x.data().begin(), x.data().end(), [](double v) { return std::isfinite(v); }))
    throw ValidationError("feature matrix contains a non-finite value");
}

ClassMask check_training_data(const Matrix& x, std::span<const Label> y) {
  if (x.rows() != y.size())
    throw DimensionError("feature rows (" + std::to_string(x.rows()) + ") and labels (" +
                         std::to_string(y.size()) + ") differ");
  if (x.cols() == 0) throw DimensionError("feature matrix has no columns");
  check_features(x, x.cols());
  ClassMask present{};
  for (Label l : y) {
    if (!valid_label(l)) throw ValidationError("label " + std::to_string(l) + " outside 0..4");
    present[static_cast<std::size_t>(l)] = true;
  }
  if (std::count(present.begin(), present.end(), true) < 2)
    throw DegenerateError("meta-classifier training data must contain at least two classes");
  return present;
}

std::vector<Label> argmax_rows(const Matrix& probs) {
  std::vector<Label> out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) out[i] = argmax(probs.row(i));
  return out;
}

}  // namespace enstack::meta
