#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "enstack/corpus.hpp"
#include "enstack/matrix.hpp"

namespace enstack::meta {

/// Fixed order used for tie-breaking during selection.
enum class MetaKind { LR = 0, RF = 1, SVM = 2, GBT = 3 };

inline constexpr std::array<MetaKind, 4> kAllMetaKinds{MetaKind::LR, MetaKind::RF, MetaKind::SVM,
                                                       MetaKind::GBT};

/// Report name: "LR", "RF", "SVM", "XGBoost".
std::string_view to_string(MetaKind kind);
/// Accepts the report names plus "GBT".
MetaKind parse_meta_kind(std::string_view name);

/// Which classes occur in the training labels. Absent classes always get probability 0.
using ClassMask = std::array<bool, kNumClasses>;

/// Validates a training set and returns the classes present. Throws
/// DimensionError (shape), ValidationError (non-finite feature, bad label)
/// or DegenerateError (fewer than two classes).
ClassMask check_training_data(const Matrix& x, std::span<const Label> y);

/// Throws DimensionError unless x has `cols` columns, ValidationError on non-finite entries.
void check_features(const Matrix& x, std::size_t cols);

/// Row-wise argmax with ties to the smallest class index.
std::vector<Label> argmax_rows(const Matrix& probs);

}  // namespace enstack::meta
