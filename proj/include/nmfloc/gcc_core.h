// PHAT cross spectra, steered per-bin GCC values and the conventional
// GCC-PHAT curve over an azimuth grid.
//
// Conventions: bins k = 0..K-1 of an N-point one-sided spectrum, omega_k =
// 2 pi k / N rad/sample, and the steering delay tau(theta) = d sin(theta) / c
// expressed in samples. The steered term for bin k is
//
//   Re{ phat[k] * exp(-j omega_k tau(theta) fs) } / K
//
// so a positive azimuth corresponds to channel q lagging channel l.

#ifndef NMFLOC_GCC_CORE_H_
#define NMFLOC_GCC_CORE_H_

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "nmfloc/signal_io.h"

namespace nmfloc {

struct ArrayGeometry {
  double spacing = 0.1;          // metres between mics l and q
  double speed_of_sound = 343.0; // m/s
  int mic_l = 0;
  int mic_q = 1;

  void Validate() const;
};

class AzimuthGrid {
 public:
  // Angles in degrees, strictly increasing, inside [-90, 90].
  explicit AzimuthGrid(std::vector<double> angles_deg);

  // -90, -90 + res, ..., 90. 180 / res must be (near) integral.
  static AzimuthGrid Uniform(double resolution_deg = 1.0);

  const std::vector<double>& angles() const { return angles_; }
  std::size_t size() const { return angles_.size(); }
  double operator[](std::size_t i) const { return angles_[i]; }
  // Largest gap between neighbouring angles.
  double resolution() const { return resolution_; }

 private:
  std::vector<double> angles_;
  double resolution_ = 0;
};

// tau = d sin(theta) / c seconds.
double DelayOfAzimuth(double theta_deg, const ArrayGeometry& geometry);
// theta = asin(c tau / d) degrees; |c tau / d| must not exceed 1.
double AzimuthOfDelay(double tau, const ArrayGeometry& geometry);

inline constexpr double kPhatFloor = 1e-12;

// phat[k] = Xl[k] conj(Xq[k]) / max(|Xl[k] conj(Xq[k])|, floor).
Spectrum PhatCrossSpectrum(std::span<const Complex> xl, std::span<const Complex> xq);

// Steering cosines and sines for one (grid, geometry, N, fs), indexed
// [azimuth, bin]. Immutable once built and safe to share across threads.
class SteeringTable {
 public:
  SteeringTable(const AzimuthGrid& grid, const ArrayGeometry& geometry,
                int frame_length, int sample_rate);

  const AzimuthGrid& grid() const { return grid_; }
  const ArrayGeometry& geometry() const { return geometry_; }
  int frame_length() const { return frame_length_; }
  int sample_rate() const { return sample_rate_; }
  int num_bins() const { return static_cast<int>(cos_.cols()); }

  const Eigen::MatrixXd& cos() const { return cos_; }
  const Eigen::MatrixXd& sin() const { return sin_; }

  // Pre-rectification matrix: entry (a, k) = Re{phat[k] e^{-j w_k tau_a fs}} / K.
  Eigen::MatrixXd SteeredTerms(std::span<const Complex> phat) const;

  // (1/K) sum_k weights[k] Re{...}; null weights means all ones.
  Eigen::VectorXd WeightedSum(std::span<const Complex> phat,
                              const Eigen::VectorXd* weights) const;

 private:
  AzimuthGrid grid_;
  ArrayGeometry geometry_;
  int frame_length_;
  int sample_rate_;
  Eigen::MatrixXd cos_;
  Eigen::MatrixXd sin_;
};

// The conventional discrete GCC-PHAT R(theta) over the grid; |R| <= 1.
std::vector<double> GccPhatCurve(std::span<const Complex> phat,
                                 const SteeringTable& steering);

// Convenience form that builds the steering table for N = 2 (K - 1).
std::vector<double> GccPhatCurve(std::span<const Complex> phat,
                                 const AzimuthGrid& grid,
                                 const ArrayGeometry& geometry, int sample_rate);

// Non-negative azimuth x bin matrix: the half-wave rectified steered terms.
// Entries lie in [0, 1/K].
struct GccFrequencyMatrix {
  Eigen::MatrixXd values;
  int num_bins = 0;
};

GccFrequencyMatrix BuildGccFrequencyMatrix(std::span<const Complex> phat,
                                           const SteeringTable& steering);

// gamma / (2 d): above this frequency the pair aliases spatially.
double AliasingLimit(const ArrayGeometry& geometry);

}  // namespace nmfloc

#endif  // NMFLOC_GCC_CORE_H_
