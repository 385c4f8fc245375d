#include "nmfloc/localization.h"

#include <cmath>
#include <stdexcept>

#include "nmfloc/errors.h"

namespace nmfloc {

std::size_t ArgmaxByAzimuth(std::span<const double> values, const AzimuthGrid& grid) {
  if (values.empty() || values.size() != grid.size())
    throw std::invalid_argument("curve length does not match grid");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best] ||
        (values[i] == values[best] && std::abs(grid[i]) < std::abs(grid[best])))
      best = i;
  }
  return best;
}

std::vector<double> WeightedGcc(std::span<const Complex> phat,
                                std::span<const double> weights,
                                const SteeringTable& steering) {
  if (static_cast<int>(weights.size()) != steering.num_bins() ||
      weights.size() != phat.size())
    throw std::invalid_argument("weight length does not match bin count");
  for (double h : weights)
    if (!(h >= 0)) throw std::invalid_argument("spectral weights must be non-negative");
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(
      weights.data(), static_cast<Eigen::Index>(weights.size()));
  const Eigen::VectorXd curve = steering.WeightedSum(phat, &w);
  return {curve.data(), curve.data() + curve.size()};
}

std::vector<Candidate> AzimuthCandidates(const NmfFactors& factors,
                                         std::span<const Complex> phat,
                                         const SteeringTable& steering) {
  std::vector<Candidate> candidates;
  candidates.reserve(factors.h.rows());
  std::vector<double> weights(factors.h.cols());
  for (Eigen::Index c = 0; c < factors.h.rows(); ++c) {
    for (Eigen::Index k = 0; k < factors.h.cols(); ++k) weights[k] = factors.h(c, k);
    const std::vector<double> curve = WeightedGcc(phat, weights, steering);
    const std::size_t best = ArgmaxByAzimuth(curve, steering.grid());
    candidates.push_back({steering.grid()[best], curve[best]});
  }
  return candidates;
}

std::pair<double, int> SelectSource(std::span<const Candidate> candidates) {
  if (candidates.empty()) throw std::invalid_argument("no azimuth candidates");
  std::size_t best = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c)
    if (candidates[c].peak > candidates[best].peak) best = c;
  return {candidates[best].theta_deg, static_cast<int>(best) + 1};
}

std::uint64_t FrameSeed(std::uint64_t global_seed, std::size_t frame_index) {
  // splitmix64 finalizer over a golden-ratio combination of the inputs.
  std::uint64_t z = global_seed + 0x9E3779B97F4A7C15ULL * (frame_index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Localizer::Localizer(PipelineParams params) : params_(std::move(params)) {
  steering_ = std::make_shared<const SteeringTable>(
      AzimuthGrid::Uniform(params_.grid_resolution_deg), params_.geometry,
      params_.frame_length, params_.sample_rate);
}

Spectrum Localizer::CrossSpectrum(const FrameSpectra& frame) const {
  const auto& g = params_.geometry;
  const auto channels = static_cast<int>(frame.channels.size());
  if (channels < 2 || g.mic_l >= channels || g.mic_q >= channels || g.mic_l < 0 ||
      g.mic_q < 0)
    throw std::invalid_argument("frame lacks the configured microphone pair");
  if (frame.num_bins != steering_->num_bins())
    throw std::invalid_argument("frame bin count does not match pipeline");
  const Spectrum& xl = frame.channels[g.mic_l];
  const Spectrum& xq = frame.channels[g.mic_q];
  auto silent = [](const Spectrum& x) {
    for (const Complex& v : x)
      if (v != Complex(0, 0)) return false;
    return true;
  };
  if (silent(xl) || silent(xq)) throw DegenerateInputError("zero-power frame");
  return PhatCrossSpectrum(xl, xq);
}

AzimuthEstimate Localizer::LocalizeFrame(const FrameSpectra& frame) const {
  return LocalizeFrame(frame, nullptr);
}

AzimuthEstimate Localizer::LocalizeFrame(const FrameSpectra& frame,
                                         NmfFactors* factors_out) const {
  const Spectrum phat = CrossSpectrum(frame);
  const GccFrequencyMatrix v = BuildGccFrequencyMatrix(phat, *steering_);

  NmfOptions options = params_.nmf;
  options.seed = FrameSeed(params_.global_seed, frame.frame_index);
  NmfFactors factors = NmfFactorize(v.values, options);
  if (params_.normalize_factors) factors = NormalizeFactors(std::move(factors));

  AzimuthEstimate estimate;
  estimate.frame_index = frame.frame_index;
  estimate.candidates = AzimuthCandidates(factors, phat, *steering_);
  const auto [theta, beta] = SelectSource(estimate.candidates);
  estimate.theta_source_deg = theta;
  estimate.beta = beta;
  estimate.peak_value = estimate.candidates[beta - 1].peak;
  if (factors_out) *factors_out = std::move(factors);
  return estimate;
}

AzimuthEstimate Localizer::LocalizeFrameBaseline(const FrameSpectra& frame) const {
  const Spectrum phat = CrossSpectrum(frame);
  const std::vector<double> curve = GccPhatCurve(phat, *steering_);
  const std::size_t best = ArgmaxByAzimuth(curve, steering_->grid());
  AzimuthEstimate estimate;
  estimate.frame_index = frame.frame_index;
  estimate.theta_source_deg = steering_->grid()[best];
  estimate.beta = 0;
  estimate.peak_value = curve[best];
  return estimate;
}

}  // namespace nmfloc
