// Subband-weighted GCC-PHAT source localization.
//
// Per frame: PHAT cross spectrum -> rectified azimuth x bin matrix V ->
// NMF V ~= WH -> one spectrally weighted GCC curve per row of H -> each
// curve's peak is a candidate azimuth, and the candidate with the highest
// peak is the source.

#ifndef NMFLOC_LOCALIZATION_H_
#define NMFLOC_LOCALIZATION_H_

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "nmfloc/gcc_core.h"
#include "nmfloc/nmf.h"
#include "nmfloc/signal_io.h"

namespace nmfloc {

struct Candidate {
  double theta_deg = 0;
  double peak = 0;
};

struct AzimuthEstimate {
  double theta_source_deg = 0;
  int beta = 0;  // 1-based basis index; 0 for the conventional estimator
  double peak_value = 0;
  std::vector<Candidate> candidates;
  std::size_t frame_index = 0;
};

struct PipelineParams {
  NmfOptions nmf;  // nmf.seed is ignored; frames derive their own seed
  double grid_resolution_deg = 1.0;
  ArrayGeometry geometry;
  int sample_rate = 16000;
  int frame_length = 1024;
  std::uint64_t global_seed = 0;
  // Scale each W column to unit sum before reading off H.
  bool normalize_factors = false;
};

// Index of the maximum, preferring the smallest |theta| and then the
// smaller index among exact ties.
std::size_t ArgmaxByAzimuth(std::span<const double> values, const AzimuthGrid& grid);

// R_c(theta) = (1/K) sum_k h[k] Re{phat[k] e^{-j w_k tau fs}}. h >= 0.
std::vector<double> WeightedGcc(std::span<const Complex> phat,
                                std::span<const double> weights,
                                const SteeringTable& steering);

// One (theta_c, peak_c) per row of H.
std::vector<Candidate> AzimuthCandidates(const NmfFactors& factors,
                                         std::span<const Complex> phat,
                                         const SteeringTable& steering);

// (theta_beta, beta) with beta the 1-based index of the largest peak; the first
// index wins exact ties.
std::pair<double, int> SelectSource(std::span<const Candidate> candidates);

// Per-frame NMF seed, a mix of the global seed and the frame index.
std::uint64_t FrameSeed(std::uint64_t global_seed, std::size_t frame_index);

// Holds the shared steering table. Localize* are const and thread safe.
class Localizer {
 public:
  explicit Localizer(PipelineParams params);

  const PipelineParams& params() const { return params_; }
  const SteeringTable& steering() const { return *steering_; }
  const AzimuthGrid& grid() const { return steering_->grid(); }

  // Throws DegenerateInputError for a frame where either channel is silent.
  AzimuthEstimate LocalizeFrame(const FrameSpectra& frame) const;
  AzimuthEstimate LocalizeFrameBaseline(const FrameSpectra& frame) const;

  // The same steps with the intermediate NMF factors exposed.
  AzimuthEstimate LocalizeFrame(const FrameSpectra& frame, NmfFactors* factors) const;

 private:
  Spectrum CrossSpectrum(const FrameSpectra& frame) const;

  PipelineParams params_;
  std::shared_ptr<const SteeringTable> steering_;
};

}  // namespace nmfloc

#endif  // NMFLOC_LOCALIZATION_H_
