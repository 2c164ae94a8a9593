#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "enstack/meta/common.hpp"

namespace enstack::meta {

struct SvmParams {
  double C = 1.0;
  /// RBF width; unset means 1 / (d * Var(X)) over all training entries.
  std::optional<double> gamma;
  double tol = 1e-3;  // KKT gap at which SMO stops
  int calibration_folds = 3;
  std::uint64_t seed = 42;
  long max_iter = 10'000'000;
};

/// Solution of min 0.5 a'Qa - sum(a), 0 <= a <= C, y'a = 0, Q_ij = y_i y_j K_ij.
struct DualSolution {
  std::vector<double> alpha;
  double rho = 0.0;  // decision(x) = sum a_i y_i K(x_i, x) - rho
  double gap = 0.0;  // max violating pair gap m(a) - M(a) at exit
  double objective = 0.0;
  long iterations = 0;
};

/// SMO with second-order working-set selection over a precomputed kernel
/// matrix. `y` holds +1/-1; both classes must occur.
DualSolution solve_svm_dual(const Matrix& kernel, std::span<const double> y, double c, double tol,
                            long max_iter = 10'000'000);

double rbf_gamma_scale(const Matrix& x);
/// K(a_i, b_j) = exp(-gamma |a_i - b_j|^2).
Matrix rbf_kernel(const Matrix& a, const Matrix& b, double gamma);

/// P(positive | f) = 1 / (1 + exp(a f + b)).
struct PlattSigmoid {
  double a = 0.0;
  double b = 0.0;
  double operator()(double decision) const;
};

/// Platt scaling with the Lin/Lin/Weng Newton iteration and smoothed targets.
/// `y` holds +1 for positives, -1 otherwise.
PlattSigmoid fit_platt(std::span<const double> decision, std::span<const double> y);

struct SvmClass {
  bool present = false;
  Matrix support;  // support vectors, one per row
  std::vector<double> coef;  // alpha_i * y_i
  double rho = 0.0;
  PlattSigmoid platt;
  double kkt_gap = 0.0;
  long iterations = 0;
};

/// One-vs-rest RBF soft-margin SVM. Each class's sigmoid is fitted to
/// out-of-fold decision values from a stratified `calibration_folds` split;
/// class probabilities are the calibrated scores normalised over classes
/// seen in training.
class SvmModel {
 public:
  /// Throws CalibrationError if a present class has fewer than 5 samples.
  static SvmModel fit(const Matrix& x, std::span<const Label> y, const SvmParams& params = {});

  Matrix decision_function(const Matrix& x) const;
  Matrix predict_proba(const Matrix& x) const;

  std::size_t cols() const noexcept { return cols_; }
  double gamma() const noexcept { return gamma_; }
  const SvmParams& params() const noexcept { return params_; }
  const std::array<SvmClass, kNumClasses>& classes() const noexcept { return classes_; }

  nlohmann::json to_json() const;
  static SvmModel from_json(const nlohmann::json& j);

 private:
  SvmParams params_;
  std::size_t cols_ = 0;
  double gamma_ = 1.0;
  std::array<SvmClass, kNumClasses> classes_{};
};

}  // namespace enstack::meta
