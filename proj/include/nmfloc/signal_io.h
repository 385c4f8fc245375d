// Audio ingestion, framing, windowing and the DFT front end.

#ifndef NMFLOC_SIGNAL_IO_H_
#define NMFLOC_SIGNAL_IO_H_

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nmfloc {

using Complex = std::complex<double>;
using Spectrum = std::vector<Complex>;

// Per-channel sample sequences at a common rate. Amplitudes are unit
// normalized floating point.
struct MultichannelSignal {
  std::vector<std::vector<double>> channels;
  int sample_rate = 0;

  std::size_t num_channels() const { return channels.size(); }
  std::size_t num_samples() const {
    return channels.empty() ? 0 : channels.front().size();
  }

  // Throws std::invalid_argument on ragged channels, no channels or a
  // non-positive rate.
  void Validate() const;
};

class WavError : public std::runtime_error {
 public:
  enum class Kind { kUnreadable, kUnsupportedEncoding, kEmpty, kWriteFailed };

  WavError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Reads 8/16/24-bit integer PCM or 32-bit float WAV (plain or
// WAVE_FORMAT_EXTENSIBLE). Integer samples map to s / 2^(bits-1), so the
// most negative code is exactly -1.0.
MultichannelSignal LoadWav(const std::string& path);

// Writes 16-bit PCM. Samples are scaled by 32768, rounded and clipped, which
// makes LoadWav -> SaveWav lossless for 16-bit input.
void SaveWav(const std::string& path, const MultichannelSignal& signal);

// w(n) = 0.54 - 0.46 cos(2 pi n / (N - 1)).
std::vector<double> HammingWindow(int frame_length);

// Real-input DFT of a fixed length returning the one-sided spectrum
// (N/2 + 1 bins). Unnormalized: X[k] = sum_n x[n] exp(-j 2 pi k n / N).
class RealDft {
 public:
  explicit RealDft(int length);
  ~RealDft();
  RealDft(RealDft&&) noexcept;
  RealDft& operator=(RealDft&&) noexcept;
  RealDft(const RealDft&) = delete;
  RealDft& operator=(const RealDft&) = delete;

  int length() const { return length_; }
  int num_bins() const { return length_ / 2 + 1; }

  Spectrum Forward(std::span<const double> frame);

 private:
  struct Plan;
  int length_;
  std::unique_ptr<Plan> plan_;
};

struct FrameSpectra {
  std::vector<Spectrum> channels;
  std::size_t frame_index = 0;
  int frame_length = 0;
  int num_bins = 0;
};

// floor((len - N) / hop) + 1, or 0 when the signal is shorter than a frame.
std::size_t NumFrames(std::size_t length, int frame_length, int hop);

// Hamming-windowed one-sided spectra of every full frame. Trailing samples
// that do not fill a frame are dropped.
std::vector<FrameSpectra> FrameAndTransform(const MultichannelSignal& signal,
                                            int frame_length, int hop);

}  // namespace nmfloc

#endif  // NMFLOC_SIGNAL_IO_H_
