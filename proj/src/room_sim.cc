#include "nmfloc/room_sim.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "fftw_lock.h"
#include "nmfloc/errors.h"

namespace nmfloc {

double Distance(const Vec3& a, const Vec3& b) {
  return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

namespace {

bool Inside(const Vec3& p, const Vec3& dims) {
  return p.x > 0 && p.x < dims.x && p.y > 0 && p.y < dims.y && p.z > 0 &&
         p.z < dims.z;
}

// Image offsets along one axis: position (1 - 2q) s + 2 m L relative to the
// receiver, reflecting |m - q| + |m| times.
struct AxisImage {
  double offset;
  int reflections;
};

std::vector<AxisImage> AxisImages(double source, double receiver,
                                  double length, int max_order) {
  std::vector<AxisImage> images;
  const int span = max_order / 2 + 1;
  for (int m = -span; m <= span; ++m) {
    for (int q = 0; q <= 1; ++q) {
      int reflections = std::abs(m - q) + std::abs(m);
      if (reflections > max_order) continue;
      images.push_back({(1 - 2 * q) * source + 2 * m * length - receiver,
                        reflections});
    }
  }
  return images;
}

}  // namespace

void RoomConfig::Validate() const {
  if (!(dimensions.x > 0 && dimensions.y > 0 && dimensions.z > 0))
    throw std::invalid_argument("room dimensions must be positive");
  if (!Inside(source, dimensions))
    throw std::invalid_argument("source lies outside the room");
  for (const auto& m : mics)
    if (!Inside(m, dimensions))
      throw std::invalid_argument("microphone lies outside the room");
  if (rt60 < 0) throw std::invalid_argument("rt60 must be >= 0");
  if (max_reflection_order < 0)
    throw std::invalid_argument("max reflection order must be >= 0");
  if (!(speed_of_sound > 0))
    throw std::invalid_argument("speed of sound must be positive");
  if (mic_spacing() <= 0)
    throw std::invalid_argument("microphones coincide");
}

RoomConfig StandardGeometry(double azimuth_deg, double distance, double spacing,
                         Vec3 dimensions) {
  RoomConfig config;
  config.dimensions = dimensions;
  const Vec3 center{dimensions.x / 2, dimensions.y / 2, dimensions.z / 2};
  config.mics[0] = {center.x - spacing / 2, center.y, center.z};
  config.mics[1] = {center.x + spacing / 2, center.y, center.z};
  const double theta = azimuth_deg * std::numbers::pi / 180.0;
  config.source = {center.x - distance * std::sin(theta),
                   center.y + distance * std::cos(theta), center.z};
  return config;
}

Absorption Rt60ToAbsorption(double rt60, const Vec3& dims) {
  if (!(rt60 > 0)) throw std::invalid_argument("rt60 must be positive");
  const double volume = dims.x * dims.y * dims.z;
  const double surface = 2 * (dims.x * dims.y + dims.x * dims.z + dims.y * dims.z);
  const double alpha = 0.161 * volume / (surface * rt60);
  if (alpha > 1.0) return {1.0, true};
  return {alpha, false};
}

int ReflectionOrderCovering(const Vec3& dims, double seconds, double speed_of_sound) {
  if (!(dims.x > 0 && dims.y > 0 && dims.z > 0))
    throw std::invalid_argument("room dimensions must be positive");
  if (!(seconds >= 0) || !(speed_of_sound > 0))
    throw std::invalid_argument("duration and speed of sound must be non-negative");
  // Along direction u a path of length d crosses d |u_i| / L_i walls per
  // axis; the maximum over unit u is d * |1/L|.
  const double per_meter = std::sqrt(1 / (dims.x * dims.x) + 1 / (dims.y * dims.y) +
                                     1 / (dims.z * dims.z));
  return static_cast<int>(std::ceil(seconds * speed_of_sound * per_meter));
}

std::vector<double> ImageSourceRir(const RoomConfig& config, int which_mic,
                                   int sample_rate) {
  config.Validate();
  if (which_mic < 0 || which_mic > 1)
    throw std::invalid_argument("mic index must be 0 or 1");
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  const Vec3& mic = config.mics[which_mic];
  if (Distance(config.source, mic) <= 0)
    throw DegenerateInputError("source coincides with microphone");

  const bool anechoic = config.rt60 == 0;
  const int order = anechoic ? 0 : config.max_reflection_order;
  const double beta =
      anechoic ? 0.0
               : std::sqrt(1.0 - Rt60ToAbsorption(config.rt60, config.dimensions).alpha);
  const double samples_per_meter = sample_rate / config.speed_of_sound;

  struct Tap {
    double delay;  // samples
    double gain;
  };
  std::vector<Tap> taps;
  const auto xs = AxisImages(config.source.x, mic.x, config.dimensions.x, order);
  const auto ys = AxisImages(config.source.y, mic.y, config.dimensions.y, order);
  const auto zs = AxisImages(config.source.z, mic.z, config.dimensions.z, order);
  long last = 0;
  for (const auto& ix : xs) {
    for (const auto& iy : ys) {
      if (ix.reflections + iy.reflections > order) continue;
      for (const auto& iz : zs) {
        const int reflections = ix.reflections + iy.reflections + iz.reflections;
        if (reflections > order) continue;
        const double r = std::hypot(ix.offset, iy.offset, iz.offset);
        const double gain = (reflections == 0 ? 1.0 : std::pow(beta, reflections)) /
                            (4 * std::numbers::pi * r);
        if (gain == 0) continue;
        const double delay = r * samples_per_meter;
        taps.push_back({delay, gain});
        last = std::max(last, std::lround(delay));
      }
    }
  }

  // Two-sided width of the interpolation kernel.
  const int width = config.fractional_delay
                        ? 2 * static_cast<int>(std::lround(0.004 * sample_rate))
                        : 0;
  long length = last + 1 + width / 2;
  if (!anechoic)
    length = std::max(length, static_cast<long>(std::ceil(config.rt60 * sample_rate)));
  std::vector<double> rir(length, 0.0);
  for (const auto& t : taps) {
    if (width == 0) {
      rir[std::lround(t.delay)] += t.gain;
      continue;
    }
    const double whole = std::floor(t.delay);
    const double frac = t.delay - whole;
    const long start = static_cast<long>(whole) - width / 2 + 1;
    for (int n = 0; n < width; ++n) {
      const long index = start + n;
      if (index < 0 || index >= length) continue;
      const double x = (n - width / 2 + 1) - frac;
      const double hann = 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * x / width));
      const double sinc = x == 0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      rir[index] += t.gain * hann * sinc;
    }
  }
  return rir;
}

namespace {

std::vector<double> DirectConvolve(std::span<const double> x, std::span<const double> h) {
  std::vector<double> y(x.size() + h.size() - 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < h.size(); ++j) y[i + j] += x[i] * h[j];
  return y;
}

std::vector<double> FftConvolve(std::span<const double> x, std::span<const double> h) {
  const std::size_t out_len = x.size() + h.size() - 1;
  std::size_t n = 1;
  while (n < out_len) n <<= 1;
  const std::size_t bins = n / 2 + 1;

  double* a = fftw_alloc_real(n);
  double* b = fftw_alloc_real(n);
  fftw_complex* fa = fftw_alloc_complex(bins);
  fftw_complex* fb = fftw_alloc_complex(bins);
  fftw_plan pa, pb, inv;
  {
    std::lock_guard lock(internal::FftwPlannerMutex());
    pa = fftw_plan_dft_r2c_1d(static_cast<int>(n), a, fa, FFTW_ESTIMATE);
    pb = fftw_plan_dft_r2c_1d(static_cast<int>(n), b, fb, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), fa, a, FFTW_ESTIMATE);
  }
  std::fill(a, a + n, 0.0);
  std::fill(b, b + n, 0.0);
  std::copy(x.begin(), x.end(), a);
  std::copy(h.begin(), h.end(), b);
  fftw_execute(pa);
  fftw_execute(pb);
  for (std::size_t k = 0; k < bins; ++k) {
    const double re = fa[k][0] * fb[k][0] - fa[k][1] * fb[k][1];
    const double im = fa[k][0] * fb[k][1] + fa[k][1] * fb[k][0];
    fa[k][0] = re;
    fa[k][1] = im;
  }
  fftw_execute(inv);
  std::vector<double> y(a, a + out_len);
  for (double& v : y) v /= static_cast<double>(n);
  {
    std::lock_guard lock(internal::FftwPlannerMutex());
    fftw_destroy_plan(pa);
    fftw_destroy_plan(pb);
    fftw_destroy_plan(inv);
  }
  fftw_free(a);
  fftw_free(b);
  fftw_free(fa);
  fftw_free(fb);
  return y;
}

}  // namespace

std::vector<double> Convolve(std::span<const double> signal,
                             std::span<const double> rir) {
  if (signal.empty() || rir.empty())
    throw std::invalid_argument("convolution of an empty sequence");
  if (std::min(signal.size(), rir.size()) <= 64)
    return DirectConvolve(signal, rir);
  return FftConvolve(signal, rir);
}

double Power(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return acc / static_cast<double>(samples.size());
}

void NoiseSpec::Validate() const {
  if (kind == NoiseKind::kFile && path.empty())
    throw std::invalid_argument("file noise requires a path");
  if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_db must be finite");
}

MixResult MixNoise(const MultichannelSignal& signal, const NoiseSpec& spec) {
  signal.Validate();
  spec.Validate();
  const std::size_t len = signal.num_samples();
  for (const auto& ch : signal.channels)
    if (Power(ch) == 0)
      throw DegenerateInputError("zero-power signal: SNR undefined");

  MixResult result;
  std::vector<std::vector<double>> noise(signal.num_channels(),
                                         std::vector<double>(len));
  if (spec.kind == NoiseKind::kWhite) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& ch : noise)
      for (double& v : ch) v = gauss(rng);
  } else {
    const MultichannelSignal source = LoadWav(spec.path);
    if (source.sample_rate != signal.sample_rate)
      throw std::invalid_argument("noise file sample rate differs from signal");
    result.noise_tiled = source.num_samples() < len;
    for (std::size_t c = 0; c < noise.size(); ++c) {
      const auto& src = source.channels[c % source.num_channels()];
      for (std::size_t n = 0; n < len; ++n) noise[c][n] = src[n % src.size()];
    }
  }

  result.signal = signal;
  const double ratio = std::pow(10.0, spec.snr_db / 10.0);
  for (std::size_t c = 0; c < noise.size(); ++c) {
    const double noise_power = Power(noise[c]);
    if (noise_power == 0)
      throw DegenerateInputError("noise source has zero power");
    const double gain = std::sqrt(Power(signal.channels[c]) / (noise_power * ratio));
    for (std::size_t n = 0; n < len; ++n)
      result.signal.channels[c][n] += gain * noise[c][n];
  }
  return result;
}

}  // namespace nmfloc
