// Experiment orchestration: scene synthesis, batch localization, RMSE and
// parameter sweeps with CSV output.

#ifndef NMFLOC_HARNESS_H_
#define NMFLOC_HARNESS_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nmfloc/localization.h"
#include "nmfloc/room_sim.h"
#include "nmfloc/signal_io.h"

namespace nmfloc {

enum class Method { kProposed, kBaseline };

const char* MethodName(Method method);
// "proposed", "baseline" or "both".
std::vector<Method> ParseMethods(const std::string& name);

struct SpeechSource {
  enum class Kind { kSynthetic, kWavDir };
  Kind kind = Kind::kSynthetic;
  std::string path;       // kWavDir: every *.wav in name order, concatenated
  double duration = 8.0;  // kSynthetic, seconds
};

struct SweepAxes {
  std::vector<double> snr_db;
  std::vector<double> rt60;
  std::vector<int> num_bases;
};

struct ExperimentConfig {
  SceneConfig scene;
  PipelineParams pipeline;
  int hop = 512;
  SweepAxes axes;
  SpeechSource speech;
  std::uint64_t global_seed = 0;
  int repeats = 1;  // independent seeds pooled into each condition's RMSE
  double truth_azimuth_deg = 30.0;
  double vad_threshold = 0.01;  // fraction of the mean frame energy
  std::vector<Method> methods{Method::kProposed, Method::kBaseline};

  void Validate() const;
};

// Scene keys: sample_rate, room, source, mics, rt60, max_order,
// speed_of_sound, noise{kind, path, snr_db, seed}. Missing source/mics fall
// back to the pair at the room centre (mic_spacing, default 0.1 m) and a
// source at truth_azimuth_deg / source_distance (default 30 deg, 1.2 m).
SceneConfig ParseSceneConfig(const nlohmann::json& doc);

// Scene keys plus pipeline{...}, sweep{...}, speech{...}, global_seed,
// repeats, truth_azimuth_deg, vad_threshold. Unknown keys are rejected.
ExperimentConfig ParseExperimentConfig(const nlohmann::json& doc);
nlohmann::json LoadJsonFile(const std::string& path);

// Azimuth of the source seen from the pair, positive towards mic 0.
double GeometricAzimuth(const RoomConfig& room);

// sqrt(mean((estimate - truth)^2)).
double Rmse(std::span<const double> estimates, double truth);

// Mono harmonic stand-in for speech: voiced segments carrying every harmonic
// of a drifting 100-300 Hz f0 with a 1/h tilt, three formant bumps and faint
// breath noise, then short noise bursts and pauses. Peak-normalized to 0.9.
MultichannelSignal SyntheticSpeech(double duration, int sample_rate, std::uint64_t seed);

MultichannelSignal LoadSpeechDirectory(const std::string& dir, int sample_rate);

// Frames whose energy (summed over channels) reaches threshold times the
// mean frame energy.
std::vector<bool> VoiceActivity(const MultichannelSignal& reference, int frame_length,
                                int hop, double threshold);

struct Scene {
  MultichannelSignal reverberant;  // clean two-channel mic signals
  MultichannelSignal noisy;
  bool noise_tiled = false;
};

// Convolves a mono source with both RIRs and adds noise.
Scene BuildScene(const SceneConfig& scene, const MultichannelSignal& dry);

struct FrameResult {
  Method method;
  double time_s;
  AzimuthEstimate estimate;
};

// Localizes every frame with voiced[f] set (all frames when voiced is empty),
// once per method. Rows are ordered by method, then frame.
std::vector<FrameResult> LocalizeSignal(const MultichannelSignal& signal,
                                        const PipelineParams& params, int hop,
                                        std::span<const Method> methods,
                                        const std::vector<bool>& voiced);

// method, frame_index, time_s, theta_source_deg, beta, peak_value and
// cand<c>_theta_deg / cand<c>_peak for c = 1..max basis count.
void WriteFrameCsv(std::ostream& out, std::span<const FrameResult> rows);

struct FrameCsvRow {
  std::string method;
  double theta_deg;
};
std::vector<FrameCsvRow> ReadFrameCsv(std::istream& in);

struct Condition {
  double snr_db = 0;
  double rt60 = 0;
  int num_bases = 3;
};

struct ResultRow {
  Condition condition;
  Method method;
  double rmse_deg = 0;
  std::size_t frames = 0;
};
using ResultTable = std::vector<ResultRow>;

// Scene for one sweep point and repeat index: speech, RIRs and noise all
// derived from the global seed.
Scene BuildConditionScene(const ExperimentConfig& config, const Condition& condition,
                          int repeat);

// One row per configured method. Throws DegenerateInputError when no frame
// passes the energy gate.
ResultTable RunCondition(const ExperimentConfig& config, const Condition& condition);

// Cartesian product snr x rt60 x num_bases in that nesting order.
std::vector<Condition> SweepConditions(const ExperimentConfig& config);
ResultTable Sweep(const ExperimentConfig& config);

// snr_db, rt60_ms, num_bases, method, rmse_deg, frames.
void WriteResultCsv(std::ostream& out, const ResultTable& table);

}  // namespace nmfloc

#endif  // NMFLOC_HARNESS_H_
