#pragma once

#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "enstack/meta/boosting.hpp"
#include "enstack/meta/common.hpp"
#include "enstack/meta/forest.hpp"
#include "enstack/meta/logistic.hpp"
#include "enstack/meta/svm.hpp"

namespace enstack::meta {

/// Hyperparameters for every kind. Defaults: LR 200 iterations, RF 200 trees
/// of depth 10, RBF SVM with seed 42, GBT 100 rounds of depth 6 at learning
/// rate 0.1.
struct MetaParams {
  LogisticParams lr;
  ForestParams rf;
  SvmParams svm;
  BoostParams gbt;
};

inline constexpr int kMetaSchemaVersion = 1;

/// A trained meta-classifier of one of the four kinds.
class MetaModel {
 public:
  using Impl = std::variant<LogisticModel, ForestModel, SvmModel, BoostModel>;

  explicit MetaModel(Impl impl) : impl_(std::move(impl)) {}

  MetaKind kind() const noexcept { return static_cast<MetaKind>(impl_.index()); }
  std::size_t input_dim() const;

  /// Rows are probability vectors; throws DimensionError on a column mismatch.
  Matrix predict_proba(const Matrix& x) const;
  /// argmax of predict_proba, ties to the smallest class.
  std::vector<Label> predict(const Matrix& x) const;

  const Impl& impl() const noexcept { return impl_; }
  template <class T>
  const T& as() const {
    return std::get<T>(impl_);
  }

  /// `{schema_version, kind, hyperparameters, parameters}`.
  nlohmann::json to_json() const;
  static MetaModel from_json(const nlohmann::json& j);

 private:
  Impl impl_;
};

MetaModel fit(MetaKind kind, const Matrix& x, std::span<const Label> y, const MetaParams& params = {});

}  // namespace enstack::meta
