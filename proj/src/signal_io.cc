#include "nmfloc/signal_io.h"

#include "fftw_lock.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>
#include <numbers>

namespace nmfloc {

void MultichannelSignal::Validate() const {
  if (sample_rate <= 0)
    throw std::invalid_argument("sample rate must be positive");
  if (channels.empty())
    throw std::invalid_argument("signal has no channels");
  for (const auto& ch : channels)
    if (ch.size() != channels.front().size())
      throw std::invalid_argument("channels differ in length");
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t ReadU32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
         (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

std::uint16_t ReadU16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}

void PutU16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back((v >> 8) & 0xFF);
}

double DecodeSample(const std::uint8_t* p, std::uint16_t format, int bits) {
  if (format == kFormatFloat) {
    float f;
    std::uint32_t raw = ReadU32(p);
    std::memcpy(&f, &raw, sizeof f);
    return f;
  }
  switch (bits) {
    case 8:
      return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16:
      return static_cast<std::int16_t>(ReadU16(p)) / 32768.0;
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
  }
  return 0.0;
}

}  // namespace

MultichannelSignal LoadWav(const std::string& path) {
  using Kind = WavError::Kind;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(Kind::kUnreadable, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw WavError(Kind::kUnreadable, path + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, num_channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    std::size_t size = ReadU32(chunk + 4);
    std::size_t body = pos + 8;
    std::size_t available = std::min(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (available < 16)
        throw WavError(Kind::kUnreadable, path + ": truncated fmt chunk");
      const std::uint8_t* f = bytes.data() + body;
      format = ReadU16(f);
      num_channels = ReadU16(f + 2);
      sample_rate = ReadU32(f + 4);
      bits = ReadU16(f + 14);
      if (format == kFormatExtensible) {
        if (available < 26)
          throw WavError(Kind::kUnreadable, path + ": truncated fmt chunk");
        format = ReadU16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = available;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt || data == nullptr)
    throw WavError(Kind::kUnreadable, path + ": missing fmt or data chunk");

  bool supported =
      (format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24)) ||
      (format == kFormatFloat && bits == 32);
  if (!supported || num_channels == 0 || sample_rate == 0)
    throw WavError(Kind::kUnsupportedEncoding,
                   path + ": unsupported encoding (format " +
                       std::to_string(format) + ", " + std::to_string(bits) +
                       " bits)");

  std::size_t bytes_per_sample = bits / 8;
  std::size_t frame_bytes = bytes_per_sample * num_channels;
  std::size_t num_samples = data_size / frame_bytes;
  if (num_samples == 0)
    throw WavError(Kind::kEmpty, path + ": zero-length audio");

  MultichannelSignal signal;
  signal.sample_rate = static_cast<int>(sample_rate);
  signal.channels.assign(num_channels, std::vector<double>(num_samples));
  for (std::size_t n = 0; n < num_samples; ++n)
    for (std::size_t c = 0; c < num_channels; ++c)
      signal.channels[c][n] = DecodeSample(
          data + n * frame_bytes + c * bytes_per_sample, format, bits);
  return signal;
}

void SaveWav(const std::string& path, const MultichannelSignal& signal) {
  signal.Validate();
  const std::uint16_t channels =
      static_cast<std::uint16_t>(signal.num_channels());
  const std::uint32_t frames = static_cast<std::uint32_t>(signal.num_samples());
  const std::uint32_t data_size = frames * channels * 2;

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  PutU32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  PutU32(out, 16);
  PutU16(out, kFormatPcm);
  PutU16(out, channels);
  PutU32(out, static_cast<std::uint32_t>(signal.sample_rate));
  PutU32(out, static_cast<std::uint32_t>(signal.sample_rate) * channels * 2);
  PutU16(out, static_cast<std::uint16_t>(channels * 2));
  PutU16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  PutU32(out, data_size);
  for (std::uint32_t n = 0; n < frames; ++n) {
    for (const auto& ch : signal.channels) {
      double scaled = std::round(ch[n] * 32768.0);
      auto code = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
      PutU16(out, static_cast<std::uint16_t>(code));
    }
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw WavError(WavError::Kind::kWriteFailed, "cannot write " + path);
  file.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
  if (!file) throw WavError(WavError::Kind::kWriteFailed, "cannot write " + path);
}

std::vector<double> HammingWindow(int frame_length) {
  if (frame_length < 2)
    throw std::invalid_argument("Hamming window needs at least 2 samples");
  std::vector<double> w(frame_length);
  const double denom = frame_length - 1;
  for (int n = 0; n < frame_length; ++n)
    w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / denom);
  return w;
}

namespace internal {
std::mutex& FftwPlannerMutex() {
  static std::mutex m;
  return m;
}
}  // namespace internal

struct RealDft::Plan {
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;
};

RealDft::RealDft(int length) : length_(length), plan_(std::make_unique<Plan>()) {
  if (length < 1) throw std::invalid_argument("DFT length must be positive");
  std::lock_guard lock(internal::FftwPlannerMutex());
  plan_->in = fftw_alloc_real(length);
  plan_->out = fftw_alloc_complex(length / 2 + 1);
  plan_->plan = fftw_plan_dft_r2c_1d(length, plan_->in, plan_->out,
                                     FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
}

RealDft::~RealDft() {
  if (!plan_) return;
  std::lock_guard lock(internal::FftwPlannerMutex());
  fftw_destroy_plan(plan_->plan);
  fftw_free(plan_->in);
  fftw_free(plan_->out);
}

RealDft::RealDft(RealDft&&) noexcept = default;
RealDft& RealDft::operator=(RealDft&&) noexcept = default;

Spectrum RealDft::Forward(std::span<const double> frame) {
  if (static_cast<int>(frame.size()) != length_)
    throw std::invalid_argument("DFT input length mismatch");
  std::copy(frame.begin(), frame.end(), plan_->in);
  fftw_execute(plan_->plan);
  Spectrum spectrum(num_bins());
  for (int k = 0; k < num_bins(); ++k)
    spectrum[k] = Complex(plan_->out[k][0], plan_->out[k][1]);
  return spectrum;
}

std::size_t NumFrames(std::size_t length, int frame_length, int hop) {
  if (frame_length < 2) throw std::invalid_argument("frame length must be >= 2");
  if (hop <= 0 || hop > frame_length)
    throw std::invalid_argument("hop must be in (0, frame length]");
  if (length < static_cast<std::size_t>(frame_length)) return 0;
  return (length - frame_length) / hop + 1;
}

std::vector<FrameSpectra> FrameAndTransform(const MultichannelSignal& signal,
                                            int frame_length, int hop) {
  signal.Validate();
  const std::size_t count = NumFrames(signal.num_samples(), frame_length, hop);
  if (count == 0) throw std::invalid_argument("signal shorter than one frame");

  const std::vector<double> window = HammingWindow(frame_length);
  RealDft dft(frame_length);
  std::vector<double> buffer(frame_length);
  std::vector<FrameSpectra> frames(count);
  for (std::size_t f = 0; f < count; ++f) {
    FrameSpectra& frame = frames[f];
    frame.frame_index = f;
    frame.frame_length = frame_length;
    frame.num_bins = dft.num_bins();
    const std::size_t start = f * static_cast<std::size_t>(hop);
    for (const auto& ch : signal.channels) {
      for (int n = 0; n < frame_length; ++n)
        buffer[n] = ch[start + n] * window[n];
      frame.channels.push_back(dft.Forward(buffer));
    }
  }
  return frames;
}

}  // namespace nmfloc
