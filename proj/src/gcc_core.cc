#include "nmfloc/gcc_core.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace nmfloc {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

void ArrayGeometry::Validate() const {
  if (!(spacing > 0)) throw std::invalid_argument("mic spacing must be positive");
  if (!(speed_of_sound > 0))
    throw std::invalid_argument("speed of sound must be positive");
}

AzimuthGrid::AzimuthGrid(std::vector<double> angles_deg)
    : angles_(std::move(angles_deg)) {
  if (angles_.empty()) throw std::invalid_argument("azimuth grid is empty");
  for (std::size_t i = 0; i < angles_.size(); ++i) {
    if (!(angles_[i] >= -90.0 && angles_[i] <= 90.0))
      throw std::invalid_argument("azimuth outside [-90, 90]");
    if (i > 0) {
      if (!(angles_[i] > angles_[i - 1]))
        throw std::invalid_argument("azimuth grid must be strictly increasing");
      resolution_ = std::max(resolution_, angles_[i] - angles_[i - 1]);
    }
  }
}

AzimuthGrid AzimuthGrid::Uniform(double resolution_deg) {
  if (!(resolution_deg > 0 && resolution_deg <= 180))
    throw std::invalid_argument("grid resolution must be in (0, 180]");
  const double steps = 180.0 / resolution_deg;
  const long n = std::lround(steps);
  if (std::abs(steps - n) > 1e-9)
    throw std::invalid_argument("grid resolution must divide 180 degrees");
  std::vector<double> angles(n + 1);
  for (long i = 0; i <= n; ++i) angles[i] = -90.0 + i * (180.0 / n);
  angles.back() = 90.0;
  return AzimuthGrid(std::move(angles));
}

double DelayOfAzimuth(double theta_deg, const ArrayGeometry& geometry) {
  if (!(std::abs(theta_deg) <= 90.0))
    throw std::invalid_argument("azimuth outside [-90, 90]");
  return geometry.spacing * std::sin(theta_deg * kDegToRad) / geometry.speed_of_sound;
}

double AzimuthOfDelay(double tau, const ArrayGeometry& geometry) {
  double s = geometry.speed_of_sound * tau / geometry.spacing;
  // asin is ill-conditioned at +-1; round-off there would cost ~1e-6 degrees.
  if (std::abs(std::abs(s) - 1.0) <= 4 * std::numeric_limits<double>::epsilon())
    s = std::copysign(1.0, s);
  if (!(std::abs(s) <= 1.0))
    throw std::invalid_argument("delay exceeds the physical limit d / c");
  return std::asin(s) / kDegToRad;
}

Spectrum PhatCrossSpectrum(std::span<const Complex> xl, std::span<const Complex> xq) {
  if (xl.size() != xq.size())
    throw std::invalid_argument("spectra differ in length");
  Spectrum out(xl.size());
  for (std::size_t k = 0; k < xl.size(); ++k) {
    const Complex cross = xl[k] * std::conj(xq[k]);
    out[k] = cross / std::max(std::abs(cross), kPhatFloor);
  }
  return out;
}

SteeringTable::SteeringTable(const AzimuthGrid& grid, const ArrayGeometry& geometry,
                             int frame_length, int sample_rate)
    : grid_(grid),
      geometry_(geometry),
      frame_length_(frame_length),
      sample_rate_(sample_rate) {
  geometry.Validate();
  if (frame_length < 2) throw std::invalid_argument("frame length must be >= 2");
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  const int bins = frame_length / 2 + 1;
  const auto rows = static_cast<Eigen::Index>(grid.size());
  cos_.resize(rows, bins);
  sin_.resize(rows, bins);
  for (Eigen::Index a = 0; a < rows; ++a) {
    const double delay_samples = DelayOfAzimuth(grid[a], geometry) * sample_rate;
    for (int k = 0; k < bins; ++k) {
      const double phase = 2.0 * std::numbers::pi * k / frame_length * delay_samples;
      cos_(a, k) = std::cos(phase);
      sin_(a, k) = std::sin(phase);
    }
  }
}

namespace {

void SplitParts(std::span<const Complex> phat, int bins, Eigen::VectorXd& re,
                Eigen::VectorXd& im) {
  if (static_cast<int>(phat.size()) != bins)
    throw std::invalid_argument("cross spectrum length does not match steering table");
  re.resize(bins);
  im.resize(bins);
  for (int k = 0; k < bins; ++k) {
    re[k] = phat[k].real();
    im[k] = phat[k].imag();
  }
}

}  // namespace

// Re{(a + jb)(cos x - j sin x)} = a cos x + b sin x.
Eigen::MatrixXd SteeringTable::SteeredTerms(std::span<const Complex> phat) const {
  Eigen::VectorXd re, im;
  SplitParts(phat, num_bins(), re, im);
  const double scale = 1.0 / num_bins();
  return (cos_.array().rowwise() * re.transpose().array() +
          sin_.array().rowwise() * im.transpose().array()) *
         scale;
}

Eigen::VectorXd SteeringTable::WeightedSum(std::span<const Complex> phat,
                                           const Eigen::VectorXd* weights) const {
  Eigen::VectorXd re, im;
  SplitParts(phat, num_bins(), re, im);
  if (weights) {
    if (weights->size() != num_bins())
      throw std::invalid_argument("weight length does not match bin count");
    re.array() *= weights->array();
    im.array() *= weights->array();
  }
  return (cos_ * re + sin_ * im) / num_bins();
}

std::vector<double> GccPhatCurve(std::span<const Complex> phat,
                                 const SteeringTable& steering) {
  const Eigen::VectorXd curve = steering.WeightedSum(phat, nullptr);
  return {curve.data(), curve.data() + curve.size()};
}

std::vector<double> GccPhatCurve(std::span<const Complex> phat,
                                 const AzimuthGrid& grid,
                                 const ArrayGeometry& geometry, int sample_rate) {
  if (phat.size() < 2) throw std::invalid_argument("cross spectrum too short");
  const int frame_length = 2 * (static_cast<int>(phat.size()) - 1);
  return GccPhatCurve(phat, SteeringTable(grid, geometry, frame_length, sample_rate));
}

GccFrequencyMatrix BuildGccFrequencyMatrix(std::span<const Complex> phat,
                                           const SteeringTable& steering) {
  GccFrequencyMatrix m;
  m.values = steering.SteeredTerms(phat).cwiseMax(0.0);
  m.num_bins = steering.num_bins();
  return m;
}

double AliasingLimit(const ArrayGeometry& geometry) {
  if (!(geometry.spacing > 0)) throw std::invalid_argument("mic spacing must be positive");
  return geometry.speed_of_sound / (2.0 * geometry.spacing);
}

}  // namespace nmfloc
