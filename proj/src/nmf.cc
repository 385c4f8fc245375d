#include "nmfloc/nmf.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace nmfloc {

namespace {

// Neumaier-compensated sum: iteration-to-iteration objective changes near
// convergence are far below the rounding error of a plain sum.
class CompensatedSum {
 public:
  void Add(double x) {
    const double t = sum_ + x;
    carry_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0;
  double carry_ = 0;
};

// sum v (log v - log a) - v + a over all entries, with 0 log 0 = 0 and
// log_v holding log v on the support of V.
double KlSum(const Eigen::MatrixXd& v, const Eigen::ArrayXXd& log_v,
             const Eigen::MatrixXd& approx) {
  CompensatedSum acc;
  for (Eigen::Index j = 0; j < v.cols(); ++j)
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      const double x = v(i, j), a = approx(i, j);
      double term = a - x;
      if (x > 0) term += x * (log_v(i, j) - std::log(std::max(a, kNmfEpsilon * kNmfEpsilon)));
      acc.Add(term);
    }
  return acc.value();
}

Eigen::ArrayXXd SupportLog(const Eigen::MatrixXd& v) {
  return (v.array() > 0).select(v.array().max(kNmfEpsilon * kNmfEpsilon).log(), 0.0);
}

}  // namespace

double KlDivergence(const Eigen::MatrixXd& v, const Eigen::MatrixXd& approx) {
  return KlSum(v, SupportLog(v), approx);
}

double SquaredError(const Eigen::MatrixXd& v, const Eigen::MatrixXd& approx) {
  return (v - approx).squaredNorm();
}

namespace {

void CheckInput(const Eigen::MatrixXd& v, int num_bases) {
  const Eigen::Index limit = std::min(v.rows(), v.cols());
  if (num_bases < 1 || num_bases >= limit)
    throw std::invalid_argument("basis count must satisfy 1 <= C < min(A, K) = " +
                                std::to_string(limit));
  if (!v.allFinite()) throw std::invalid_argument("matrix contains non-finite entries");
  if ((v.array() < 0).any()) throw std::invalid_argument("matrix has negative entries");
}

void UpdateKl(const Eigen::MatrixXd& v, Eigen::MatrixXd& w, Eigen::MatrixXd& h,
              Eigen::MatrixXd& approx) {
  Eigen::MatrixXd ratio = v.array() / (approx.array() + kNmfEpsilon);
  const Eigen::VectorXd w_sums = w.colwise().sum().transpose();
  h.array() *= (w.transpose() * ratio).array().colwise() / (w_sums.array() + kNmfEpsilon);

  approx.noalias() = w * h;
  ratio = v.array() / (approx.array() + kNmfEpsilon);
  const Eigen::RowVectorXd h_sums = h.rowwise().sum().transpose();
  w.array() *= (ratio * h.transpose()).array().rowwise() / (h_sums.array() + kNmfEpsilon);
  approx.noalias() = w * h;
}

void UpdateEuclidean(const Eigen::MatrixXd& v, Eigen::MatrixXd& w, Eigen::MatrixXd& h,
                     Eigen::MatrixXd& approx) {
  const Eigen::MatrixXd wt_v = w.transpose() * v;
  const Eigen::MatrixXd wt_w_h = (w.transpose() * w) * h;
  h.array() *= wt_v.array() / (wt_w_h.array() + kNmfEpsilon);

  const Eigen::MatrixXd v_ht = v * h.transpose();
  const Eigen::MatrixXd w_h_ht = w * (h * h.transpose());
  w.array() *= v_ht.array() / (w_h_ht.array() + kNmfEpsilon);
  approx.noalias() = w * h;
}

}  // namespace

NmfFactors NmfFactorize(const Eigen::MatrixXd& v, const NmfOptions& options) {
  CheckInput(v, options.num_bases);
  if (options.max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> init(0.1, 1.0);
  NmfFactors f;
  f.w.resize(v.rows(), options.num_bases);
  f.h.resize(options.num_bases, v.cols());
  for (Eigen::Index j = 0; j < f.w.cols(); ++j)
    for (Eigen::Index i = 0; i < f.w.rows(); ++i) f.w(i, j) = init(rng);
  for (Eigen::Index j = 0; j < f.h.cols(); ++j)
    for (Eigen::Index i = 0; i < f.h.rows(); ++i) f.h(i, j) = init(rng);

  const bool kl = options.objective == NmfObjective::kKullbackLeibler;
  const Eigen::ArrayXXd log_v = kl ? SupportLog(v) : Eigen::ArrayXXd();
  auto objective = [&](const Eigen::MatrixXd& approx) {
    return kl ? KlSum(v, log_v, approx) : SquaredError(v, approx);
  };

  Eigen::MatrixXd approx = f.w * f.h;
  f.objective_trace.reserve(options.max_iters + 1);
  f.objective_trace.push_back(objective(approx));
  for (int it = 0; it < options.max_iters; ++it) {
    if (kl)
      UpdateKl(v, f.w, f.h, approx);
    else
      UpdateEuclidean(v, f.w, f.h, approx);
    const double previous = f.objective_trace.back();
    const double current = objective(approx);
    f.objective_trace.push_back(current);
    if (previous <= 0 || (previous - current) < options.rel_tol * previous) break;
  }
  return f;
}

Eigen::MatrixXd Reconstruct(const NmfFactors& factors) {
  if (factors.w.cols() != factors.h.rows())
    throw std::invalid_argument("factor shapes are incompatible");
  return factors.w * factors.h;
}

NmfFactors NormalizeFactors(NmfFactors factors) {
  for (Eigen::Index c = 0; c < factors.w.cols(); ++c) {
    const double total = factors.w.col(c).sum();
    if (total <= 0) continue;
    factors.w.col(c) /= total;
    factors.h.row(c) *= total;
  }
  return factors;
}

}  // namespace nmfloc
