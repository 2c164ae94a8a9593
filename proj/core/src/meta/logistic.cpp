#include "enstack/meta/logistic.hpp"

#include "enstack/error.hpp"
#include "linalg.hpp"

#include <cmath>
#include <numeric>

namespace enstack::meta {

namespace {

using detail::sigmoid;
using detail::softplus;

struct BinaryProblem {
  const Matrix& x;
  std::vector<double> y;  // +1 / -1
  double c;

  std::size_t dim() const { return x.cols() + 1; }

  double margin(std::span<const double> w, std::size_t i) const {
    const auto row = x.row(i);
    double z = w[row.size()];
    for (std::size_t j = 0; j < row.size(); ++j) z += w[j] * row[j];
    return z;
  }

  double objective(std::span<const double> w) const {
    double f = 0.5 * std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) f += c * softplus(-y[i] * margin(w, i));
    return f;
  }

  // Gradient into g, Hessian into h (dim x dim).
  void derivatives(std::span<const double> w, std::vector<double>& g, std::vector<double>& h) const {
    const std::size_t d = dim();
    g.assign(w.begin(), w.end());
    h.assign(d * d, 0.0);
    for (std::size_t j = 0; j < d; ++j) h[j * d + j] = 1.0;
    std::vector<double> xi(d, 1.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto row = x.row(i);
      std::copy(row.begin(), row.end(), xi.begin());
      const double z = margin(w, i);
      const double s = sigmoid(z);
      const double coef = -c * y[i] * sigmoid(-y[i] * z);
      const double curv = c * s * (1.0 - s);
      for (std::size_t a = 0; a < d; ++a) {
        g[a] += coef * xi[a];
        for (std::size_t b = 0; b <= a; ++b) h[a * d + b] += curv * xi[a] * xi[b];
      }
    }
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a + 1; b < d; ++b) h[a * d + b] = h[b * d + a];
  }
};

double norm(std::span<const double> v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

LogisticClass solve(const BinaryProblem& p, const LogisticParams& params) {
  LogisticClass out;
  out.present = true;
  out.w.assign(p.dim(), 0.0);
  std::vector<double> g, h, step(p.dim()), trial(p.dim());
  double f = p.objective(out.w);
  for (;;) {
    p.derivatives(out.w, g, h);
    out.grad_norm = norm(g);
    if (out.grad_norm < params.tol) break;
    if (out.iterations >= params.max_iter) {
      out.hit_cap = true;
      break;
    }
    for (std::size_t k = 0; k < step.size(); ++k) step[k] = -g[k];
    if (!detail::cholesky_solve(h, step)) {
      // H >= I in exact arithmetic; fall back to steepest descent if rounding says otherwise.
      for (std::size_t k = 0; k < step.size(); ++k) step[k] = -g[k];
    }
    const double slope = std::inner_product(g.begin(), g.end(), step.begin(), 0.0);
    double t = 1.0;
    double trial_f = f;
    bool moved = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      for (std::size_t j = 0; j < trial.size(); ++j) trial[j] = out.w[j] + t * step[j];
      trial_f = p.objective(trial);
      if (trial_f <= f + 1e-4 * t * slope) {
        moved = true;
        break;
      }
    }
    ++out.iterations;
    if (!moved) {
      // Flat at machine precision; report the gradient where we stand.
      out.hit_cap = out.iterations >= params.max_iter;
      break;
    }
    out.w = trial;
    f = trial_f;
  }
  return out;
}

}  // namespace

LogisticModel LogisticModel::fit(const Matrix& x, std::span<const Label> y, const LogisticParams& params) {
  if (!(params.C > 0.0)) throw ValidationError("LR: C must be positive");
  if (params.max_iter < 0) throw ValidationError("LR: max_iter must be >= 0");
  const auto present = check_training_data(x, y);
  LogisticModel m;
  m.params_ = params;
  m.cols_ = x.cols();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (!present[c]) {
      m.classes_[c].w.assign(x.cols() + 1, 0.0);
      continue;
    }
    BinaryProblem p{x, std::vector<double>(y.size()), params.C};
    for (std::size_t i = 0; i < y.size(); ++i) p.y[i] = static_cast<std::size_t>(y[i]) == c ? 1.0 : -1.0;
    m.classes_[c] = solve(p, params);
  }
  return m;
}

LogisticModel LogisticModel::zeros(std::size_t cols, const LogisticParams& params) {
  LogisticModel m;
  m.params_ = params;
  m.cols_ = cols;
  for (auto& c : m.classes_) {
    c.present = true;
    c.w.assign(cols + 1, 0.0);
  }
  return m;
}

double LogisticModel::decision(std::size_t cls, std::span<const double> row) const {
  const auto& w = classes_[cls].w;
  double z = w[cols_];
  for (std::size_t j = 0; j < cols_; ++j) z += w[j] * row[j];
  return z;
}

Matrix LogisticModel::predict_proba(const Matrix& x) const {
  check_features(x, cols_);
  Matrix out(x.rows(), kNumClasses);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c)
      if (classes_[c].present) sum += (out(i, c) = sigmoid(decision(c, x.row(i))));
    for (std::size_t c = 0; c < kNumClasses; ++c) out(i, c) /= sum;
  }
  return out;
}

nlohmann::json LogisticModel::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : classes_)
    classes.push_back({{"present", c.present},
                       {"weights", c.w},
                       {"iterations", c.iterations},
                       {"grad_norm", c.grad_norm},
                       {"hit_cap", c.hit_cap}});
  return {{"hyperparameters", {{"C", params_.C}, {"max_iter", params_.max_iter}, {"tol", params_.tol}}},
          {"parameters", {{"cols", cols_}, {"classes", classes}}}};
}

LogisticModel LogisticModel::from_json(const nlohmann::json& j) {
  LogisticModel m;
  const auto& hp = j.at("hyperparameters");
  m.params_ = {hp.at("C").get<double>(), hp.at("max_iter").get<int>(), hp.at("tol").get<double>()};
  const auto& p = j.at("parameters");
  m.cols_ = p.at("cols").get<std::size_t>();
  const auto& classes = p.at("classes");
  if (classes.size() != kNumClasses) throw FormatError("LR model must list 5 classes");
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& dst = m.classes_[c];
    dst.present = classes[c].at("present").get<bool>();
    dst.w = classes[c].at("weights").get<std::vector<double>>();
    dst.iterations = classes[c].at("iterations").get<int>();
    dst.grad_norm = classes[c].at("grad_norm").get<double>();
    dst.hit_cap = classes[c].at("hit_cap").get<bool>();
    if (dst.w.size() != m.cols_ + 1) throw FormatError("LR weight vector has wrong length");
  }
  return m;
}

}  // namespace enstack::meta
