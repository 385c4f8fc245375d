// Multiplicative-update NMF, V (A x K) ~= W (A x C) H (C x K).
//
// Columns of W are delay basis vectors over the azimuth grid and rows of H
// the matching spectral weights over frequency bins.

#ifndef NMFLOC_NMF_H_
#define NMFLOC_NMF_H_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace nmfloc {

enum class NmfObjective {
  kKullbackLeibler,  // generalized KL divergence D(V || WH)
  kEuclidean,        // squared Frobenius distance
};

struct NmfOptions {
  int num_bases = 3;
  int max_iters = 200;
  double rel_tol = 1e-5;
  std::uint64_t seed = 0;
  NmfObjective objective = NmfObjective::kKullbackLeibler;
};

inline constexpr double kNmfEpsilon = 1e-12;

struct NmfFactors {
  Eigen::MatrixXd w;
  Eigen::MatrixXd h;
  // Objective at initialization followed by one value per iteration.
  std::vector<double> objective_trace;

  int num_bases() const { return static_cast<int>(w.cols()); }
};

double KlDivergence(const Eigen::MatrixXd& v, const Eigen::MatrixXd& approx);
double SquaredError(const Eigen::MatrixXd& v, const Eigen::MatrixXd& approx);

// W and H start uniform in (0.1, 1.0) from `seed`; each iteration updates H
// then W. Stops after max_iters, or once the relative objective decrease
// falls below rel_tol. Requires 1 <= C < min(A, K) and V >= 0.
NmfFactors NmfFactorize(const Eigen::MatrixXd& v, const NmfOptions& options);

// W * H.
Eigen::MatrixXd Reconstruct(const NmfFactors& factors);

// Scales each non-zero column of W to unit sum and the matching row of H by
// the inverse, leaving W * H unchanged.
NmfFactors NormalizeFactors(NmfFactors factors);

}  // namespace nmfloc

#endif  // NMFLOC_NMF_H_
