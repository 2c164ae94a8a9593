#include "enstack/meta/svm.hpp"

#include "enstack/error.hpp"
#include "enstack/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace enstack::meta {

namespace {

constexpr double kTau = 1e-12;

// Kernel restricted to a subset of rows of a precomputed square matrix.
struct KernelView {
  const Matrix& k;
  std::span<const std::size_t> idx;
  double operator()(std::size_t a, std::size_t b) const { return k(idx[a], idx[b]); }
  std::size_t size() const { return idx.size(); }
};

DualSolution smo(const KernelView& kv, std::span<const double> y, double c, double tol, long max_iter) {
  const std::size_t n = kv.size();
  DualSolution sol;
  sol.alpha.assign(n, 0.0);
  auto& a = sol.alpha;
  std::vector<double> g(n, -1.0);
  std::vector<double> qd(n);
  for (std::size_t t = 0; t < n; ++t) qd[t] = kv(t, t);
  auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * kv(i, j); };

  for (;;) {
    // Select i: maximal violator in I_up.
    double gmax = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0 ? a[t] < c : a[t] > 0.0) {
        const double v = -y[t] * g[t];
        if (v >= gmax) gmax = v, i = static_cast<std::ptrdiff_t>(t);
      }
    }
    // Select j in I_low by second-order gain.
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t j = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    if (i >= 0) {
      const auto ii = static_cast<std::size_t>(i);
      for (std::size_t t = 0; t < n; ++t) {
        if (!(y[t] > 0 ? a[t] > 0.0 : a[t] < c)) continue;
        const double v = y[t] * g[t];
        gmax2 = std::max(gmax2, v);
        const double diff = gmax + v;
        if (diff > 0.0) {
          double quad = qd[ii] + qd[t] - 2.0 * y[ii] * y[t] * kv(ii, t);
          if (quad <= 0.0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best_obj) best_obj = obj, j = static_cast<std::ptrdiff_t>(t);
        }
      }
    }
    sol.gap = gmax + gmax2;
    if (i < 0 || j < 0 || sol.gap < tol || sol.iterations >= max_iter) {
      if (i < 0 || j < 0) sol.gap = std::max(0.0, sol.gap);
      break;
    }
    ++sol.iterations;
    const auto ii = static_cast<std::size_t>(i), jj = static_cast<std::size_t>(j);
    const double old_i = a[ii], old_j = a[jj];
    const double qij = q(ii, jj);
    if (y[ii] != y[jj]) {
      double quad = qd[ii] + qd[jj] + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-g[ii] - g[jj]) / quad;
      const double diff = a[ii] - a[jj];
      a[ii] += delta;
      a[jj] += delta;
      if (diff > 0.0) {
        if (a[jj] < 0.0) a[jj] = 0.0, a[ii] = diff;
      } else if (a[ii] < 0.0) {
        a[ii] = 0.0, a[jj] = -diff;
      }
      if (diff > 0.0) {
        if (a[ii] > c) a[ii] = c, a[jj] = c - diff;
      } else if (a[jj] > c) {
        a[jj] = c, a[ii] = c + diff;
      }
    } else {
      double quad = qd[ii] + qd[jj] - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (g[ii] - g[jj]) / quad;
      const double sum = a[ii] + a[jj];
      a[ii] -= delta;
      a[jj] += delta;
      if (sum > c) {
        if (a[ii] > c) a[ii] = c, a[jj] = sum - c;
      } else if (a[jj] < 0.0) {
        a[jj] = 0.0, a[ii] = sum;
      }
      if (sum > c) {
        if (a[jj] > c) a[jj] = c, a[ii] = sum - c;
      } else if (a[ii] < 0.0) {
        a[ii] = 0.0, a[jj] = sum;
      }
    }
    const double di = a[ii] - old_i, dj = a[jj] - old_j;
    for (std::size_t t = 0; t < n; ++t) g[t] += q(ii, t) * di + q(jj, t) * dj;
  }

  // rho from free variables, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t nr_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * g[t];
    if (a[t] >= c) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (a[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++nr_free;
      sum_free += yg;
    }
  }
  sol.rho = nr_free > 0 ? sum_free / static_cast<double>(nr_free) : (ub + lb) / 2.0;
  for (std::size_t t = 0; t < n; ++t) sol.objective += a[t] * (g[t] - 1.0) / 2.0;
  return sol;
}

void check_binary(std::span<const double> y) {
  bool pos = false, neg = false;
  for (double v : y) {
    if (v == 1.0) pos = true;
    else if (v == -1.0) neg = true;
    else throw ValidationError("SVM labels must be +1 or -1");
  }
  if (!pos || !neg) throw DegenerateError("SVM binary problem needs both classes");
}

}  // namespace

DualSolution solve_svm_dual(const Matrix& kernel, std::span<const double> y, double c, double tol, long max_iter) {
  if (kernel.rows() != kernel.cols() || kernel.rows() != y.size())
    throw DimensionError("kernel matrix must be square and match the label count");
  check_binary(y);
  std::vector<std::size_t> idx(y.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return smo(KernelView{kernel, idx}, y, c, tol, max_iter);
}

double rbf_gamma_scale(const Matrix& x) {
  const auto& d = x.data();
  if (d.empty()) return 1.0;
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d.size());
  return var > 0.0 ? 1.0 / (static_cast<double>(x.cols()) * var) : 1.0;
}

Matrix rbf_kernel(const Matrix& a, const Matrix& b, double gamma) {
  Matrix k(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ra = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto rb = b.row(j);
      double d2 = 0.0;
      for (std::size_t f = 0; f < ra.size(); ++f) {
        const double diff = ra[f] - rb[f];
        d2 += diff * diff;
      }
      k(i, j) = std::exp(-gamma * d2);
    }
  }
  return k;
}

double PlattSigmoid::operator()(double decision) const {
  const double z = a * decision + b;
  return z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

PlattSigmoid fit_platt(std::span<const double> dec, std::span<const double> y) {
  if (dec.size() != y.size()) throw DimensionError("decision values and labels differ in length");
  double prior1 = 0.0, prior0 = 0.0;
  for (double v : y) (v > 0.0 ? prior1 : prior0) += 1.0;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  const std::size_t n = dec.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = y[i] > 0.0 ? hi : lo;

  auto value = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * a + b;
      f += z >= 0.0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };

  PlattSigmoid s{0.0, std::log((prior0 + 1.0) / (prior1 + 1.0))};
  double fval = value(s.a, s.b);
  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10, kSigma = 1e-12, kEps = 1e-5;
  for (int it = 0; it < kMaxIter; ++it) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * s.a + s.b;
      double p, q;
      if (z >= 0.0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = s.a + step * da, nb = s.b + step * db;
      const double nf = value(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        s = {na, nb};
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  return s;
}

SvmModel SvmModel::fit(const Matrix& x, std::span<const Label> y, const SvmParams& params) {
  if (!(params.C > 0.0)) throw ValidationError("SVM: C must be positive");
  if (params.gamma && !(*params.gamma > 0.0)) throw ValidationError("SVM: gamma must be positive");
  if (params.calibration_folds < 2) throw ValidationError("SVM: calibration needs at least 2 folds");
  const auto present = check_training_data(x, y);
  std::array<std::size_t, kNumClasses> support{};
  for (Label l : y) ++support[static_cast<std::size_t>(l)];
  for (std::size_t c = 0; c < kNumClasses; ++c)
    if (present[c] && support[c] < 5)
      throw CalibrationError("SVM calibration needs at least 5 samples of class " + std::to_string(c) + ", found " +
                             std::to_string(support[c]));

  SvmModel m;
  m.params_ = params;
  m.cols_ = x.cols();
  m.gamma_ = params.gamma.value_or(rbf_gamma_scale(x));
  const Matrix k = rbf_kernel(x, x, m.gamma_);
  const std::size_t n = x.rows();
  const auto folds = static_cast<std::size_t>(params.calibration_folds);

  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (!present[c]) continue;
    std::vector<double> yb(n);
    for (std::size_t i = 0; i < n; ++i) yb[i] = static_cast<std::size_t>(y[i]) == c ? 1.0 : -1.0;

    // Stratified fold assignment over the binary labels.
    std::vector<std::size_t> fold(n);
    SplitMix64 rng(derive_seed(params.seed, c));
    for (double side : {1.0, -1.0}) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i)
        if (yb[i] == side) members.push_back(i);
      rng.shuffle(std::span<std::size_t>(members));
      for (std::size_t r = 0; r < members.size(); ++r) fold[members[r]] = r % folds;
    }
    std::vector<double> oof(n, 0.0);
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<std::size_t> train, held;
      for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? held : train).push_back(i);
      std::vector<double> ytr(train.size());
      for (std::size_t r = 0; r < train.size(); ++r) ytr[r] = yb[train[r]];
      const auto sol = smo(KernelView{k, train}, ytr, params.C, params.tol, params.max_iter);
      for (auto h : held) {
        double d = -sol.rho;
        for (std::size_t r = 0; r < train.size(); ++r)
          if (sol.alpha[r] > 0.0) d += sol.alpha[r] * ytr[r] * k(train[r], h);
        oof[h] = d;
      }
    }
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto sol = smo(KernelView{k, all}, yb, params.C, params.tol, params.max_iter);
    auto& cls = m.classes_[c];
    cls.present = true;
    cls.rho = sol.rho;
    cls.kkt_gap = sol.gap;
    cls.iterations = sol.iterations;
    cls.platt = fit_platt(oof, yb);
    std::vector<std::size_t> sv;
    for (std::size_t i = 0; i < n; ++i)
      if (sol.alpha[i] > 0.0) sv.push_back(i);
    cls.support = x.select_rows(sv);
    for (auto i : sv) cls.coef.push_back(sol.alpha[i] * yb[i]);
  }
  return m;
}

Matrix SvmModel::decision_function(const Matrix& x) const {
  check_features(x, cols_);
  Matrix out(x.rows(), kNumClasses);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& cls = classes_[c];
    if (!cls.present) continue;
    const Matrix k = rbf_kernel(x, cls.support, gamma_);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double d = -cls.rho;
      for (std::size_t s = 0; s < cls.coef.size(); ++s) d += cls.coef[s] * k(i, s);
      out(i, c) = d;
    }
  }
  return out;
}

Matrix SvmModel::predict_proba(const Matrix& x) const {
  Matrix out = decision_function(x);
  std::size_t n_present = 0;
  for (const auto& cls : classes_) n_present += cls.present;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c)
      sum += (out(i, c) = classes_[c].present ? classes_[c].platt(out(i, c)) : 0.0);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (!classes_[c].present) continue;
      out(i, c) = sum > 0.0 ? out(i, c) / sum : 1.0 / static_cast<double>(n_present);
    }
  }
  return out;
}

nlohmann::json SvmModel::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : classes_) {
    nlohmann::json sv = nlohmann::json::array();
    for (std::size_t r = 0; r < c.support.rows(); ++r) {
      const auto row = c.support.row(r);
      sv.push_back(std::vector<double>(row.begin(), row.end()));
    }
    classes.push_back({{"present", c.present},
                       {"support_vectors", sv},
                       {"coef", c.coef},
                       {"rho", c.rho},
                       {"platt_a", c.platt.a},
                       {"platt_b", c.platt.b},
                       {"kkt_gap", c.kkt_gap},
                       {"iterations", c.iterations}});
  }
  nlohmann::json hp{{"C", params_.C},
                    {"kernel", "rbf"},
                    {"tol", params_.tol},
                    {"calibration_folds", params_.calibration_folds},
                    {"seed", params_.seed},
                    {"max_iter", params_.max_iter}};
  hp["gamma"] = params_.gamma ? nlohmann::json(*params_.gamma) : nlohmann::json("scale");
  return {{"hyperparameters", hp}, {"parameters", {{"cols", cols_}, {"gamma", gamma_}, {"classes", classes}}}};
}

SvmModel SvmModel::from_json(const nlohmann::json& j) {
  SvmModel m;
  const auto& hp = j.at("hyperparameters");
  m.params_.C = hp.at("C").get<double>();
  m.params_.tol = hp.at("tol").get<double>();
  m.params_.calibration_folds = hp.at("calibration_folds").get<int>();
  m.params_.seed = hp.at("seed").get<std::uint64_t>();
  m.params_.max_iter = hp.at("max_iter").get<long>();
  if (hp.at("gamma").is_number()) m.params_.gamma = hp.at("gamma").get<double>();
  const auto& p = j.at("parameters");
  m.cols_ = p.at("cols").get<std::size_t>();
  m.gamma_ = p.at("gamma").get<double>();
  const auto& classes = p.at("classes");
  if (classes.size() != kNumClasses) throw FormatError("SVM model must list 5 classes");
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& cj = classes[c];
    auto& dst = m.classes_[c];
    dst.present = cj.at("present").get<bool>();
    const auto& sv = cj.at("support_vectors");
    dst.support = Matrix(sv.size(), m.cols_);
    for (std::size_t r = 0; r < sv.size(); ++r) {
      const auto row = sv[r].get<std::vector<double>>();
      if (row.size() != m.cols_) throw FormatError("SVM support vector has wrong length");
      std::copy(row.begin(), row.end(), dst.support.row(r).begin());
    }
    dst.coef = cj.at("coef").get<std::vector<double>>();
    if (dst.coef.size() != sv.size()) throw FormatError("SVM coefficient count mismatch");
    dst.rho = cj.at("rho").get<double>();
    dst.platt = {cj.at("platt_a").get<double>(), cj.at("platt_b").get<double>()};
    dst.kkt_gap = cj.at("kkt_gap").get<double>();
    dst.iterations = cj.at("iterations").get<long>();
  }
  return m;
}

}  // namespace enstack::meta
