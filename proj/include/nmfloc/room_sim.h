// Two-microphone scene synthesis: shoebox image-source impulse responses,
// linear convolution and SNR-controlled noise mixing.

#ifndef NMFLOC_ROOM_SIM_H_
#define NMFLOC_ROOM_SIM_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nmfloc/signal_io.h"

namespace nmfloc {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

double Distance(const Vec3& a, const Vec3& b);

struct RoomConfig {
  Vec3 dimensions{3.5, 4.5, 2.5};
  Vec3 source;
  std::array<Vec3, 2> mics;
  double rt60 = 0.0;  // seconds; 0 means anechoic (direct path only)
  int max_reflection_order = 10;
  double speed_of_sound = 343.0;
  // Spread each tap over a Hann-windowed sinc (8 ms) instead of rounding the
  // arrival time to the nearest sample.
  bool fractional_delay = true;

  // Throws std::invalid_argument when a dimension is not positive, a point
  // lies outside the room, rt60 < 0, order < 0, or the mics coincide.
  void Validate() const;
  double mic_spacing() const { return Distance(mics[0], mics[1]); }
};

// Places the pair at `center`, separated by `spacing` along x, and the source
// at `distance` from the centre. Azimuth is measured from broadside (the +y
// axis) and is positive towards mic 0, so a positive azimuth delays mic 1.
RoomConfig StandardGeometry(double azimuth_deg, double distance, double spacing,
                         Vec3 dimensions = {3.5, 4.5, 2.5});

struct Absorption {
  double alpha = 1.0;
  bool clamped = false;  // Sabine inversion exceeded 1
};

// Sabine inversion alpha = 0.161 V / (S rt60), clamped to 1.
Absorption Rt60ToAbsorption(double rt60, const Vec3& dimensions);

// Smallest reflection order that includes every image arriving within
// `seconds`, in the sense that a longer path can cross no more walls than the
// returned count over that distance.
int ReflectionOrderCovering(const Vec3& dimensions, double seconds,
                            double speed_of_sound = 343.0);

// Impulse response from the source to mics[which_mic]. Every image with total
// wall-crossing count <= max_reflection_order contributes amplitude
// sqrt(1 - alpha)^order / (4 pi r) at delay r / c, either at the nearest
// sample or as a windowed-sinc fractional delay. The response is long enough
// for the farthest image and for rt60 * fs.
std::vector<double> ImageSourceRir(const RoomConfig& config, int which_mic,
                                   int sample_rate);

// Full linear convolution, length signal + rir - 1.
std::vector<double> Convolve(std::span<const double> signal,
                             std::span<const double> rir);

// Mean square value.
double Power(std::span<const double> samples);

enum class NoiseKind { kWhite, kFile };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kWhite;
  std::string path;  // required for kFile
  double snr_db = 20.0;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct MixResult {
  MultichannelSignal signal;
  bool noise_tiled = false;  // file noise was shorter than the signal
};

// Adds noise so that 10 log10(P_signal / P_noise) == snr_db on every channel,
// with powers measured over the full signal. White noise is Gaussian and
// independent per channel; file noise uses channel c % noise_channels.
MixResult MixNoise(const MultichannelSignal& signal, const NoiseSpec& spec);

// Room, noise and rate as read from a scene JSON document.
struct SceneConfig {
  RoomConfig room;
  NoiseSpec noise;
  int sample_rate = 16000;
};

}  // namespace nmfloc

#endif  // NMFLOC_ROOM_SIM_H_
