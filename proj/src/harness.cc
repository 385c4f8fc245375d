#include "nmfloc/harness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "nmfloc/errors.h"
#include "nmfloc/parallel.h"

namespace nmfloc {

using nlohmann::json;

const char* MethodName(Method method) {
  return method == Method::kProposed ? "proposed" : "baseline";
}

std::vector<Method> ParseMethods(const std::string& name) {
  if (name == "proposed") return {Method::kProposed};
  if (name == "baseline") return {Method::kBaseline};
  if (name == "both") return {Method::kProposed, Method::kBaseline};
  throw std::invalid_argument("method must be proposed, baseline or both");
}

void ExperimentConfig::Validate() const {
  scene.room.Validate();
  scene.noise.Validate();
  pipeline.geometry.Validate();
  if (axes.snr_db.empty() || axes.rt60.empty() || axes.num_bases.empty())
    throw std::invalid_argument("sweep axes must be non-empty");
  for (double r : axes.rt60)
    if (r < 0) throw std::invalid_argument("rt60 values must be >= 0");
  for (int c : axes.num_bases)
    if (c < 1) throw std::invalid_argument("basis counts must be >= 1");
  if (!(std::abs(truth_azimuth_deg) <= 90))
    throw std::invalid_argument("truth azimuth outside the grid span");
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  if (hop <= 0 || hop > pipeline.frame_length)
    throw std::invalid_argument("hop must be in (0, frame_length]");
  if (speech.kind == SpeechSource::Kind::kSynthetic && !(speech.duration > 0))
    throw std::invalid_argument("synthetic speech duration must be positive");
  if (methods.empty()) throw std::invalid_argument("no methods selected");
}

namespace {

Vec3 ReadVec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw std::invalid_argument(std::string(what) + " must be an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void RejectUnknown(const json& doc, const std::set<std::string>& allowed,
                   const std::string& where) {
  if (!doc.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
std::vector<T> ReadList(const json& j, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(std::string(what) + " must be a list");
  return j.get<std::vector<T>>();
}

const std::set<std::string> kSceneKeys = {
    "sample_rate", "room",  "source",   "mics",          "rt60",
    "max_order",   "noise", "mic_spacing", "speed_of_sound", "source_distance",
    "truth_azimuth_deg", "fractional_delay"};

}  // namespace

SceneConfig ParseSceneConfig(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("scene must be a JSON object");
  SceneConfig scene;
  scene.sample_rate = doc.value("sample_rate", 16000);
  const Vec3 dims = doc.contains("room") ? ReadVec3(doc["room"], "room")
                                         : Vec3{3.5, 4.5, 2.5};
  const double spacing = doc.value("mic_spacing", 0.1);
  scene.room = StandardGeometry(doc.value("truth_azimuth_deg", 30.0),
                             doc.value("source_distance", 1.2), spacing, dims);
  if (doc.contains("mics")) {
    const json& mics = doc["mics"];
    if (!mics.is_array() || mics.size() != 2)
      throw std::invalid_argument("mics must list exactly two positions");
    scene.room.mics = {ReadVec3(mics[0], "mic"), ReadVec3(mics[1], "mic")};
  }
  if (doc.contains("source")) scene.room.source = ReadVec3(doc["source"], "source");
  scene.room.rt60 = doc.value("rt60", 0.0);
  scene.room.max_reflection_order = doc.value("max_order", 10);
  scene.room.speed_of_sound = doc.value("speed_of_sound", 343.0);
  scene.room.fractional_delay = doc.value("fractional_delay", true);

  if (doc.contains("noise")) {
    const json& n = doc["noise"];
    RejectUnknown(n, {"kind", "path", "snr_db", "seed"}, "noise");
    const std::string kind = n.value("kind", "white");
    if (kind == "white")
      scene.noise.kind = NoiseKind::kWhite;
    else if (kind == "file")
      scene.noise.kind = NoiseKind::kFile;
    else
      throw std::invalid_argument("noise.kind must be white or file");
    if (n.contains("path") && !n["path"].is_null())
      scene.noise.path = n["path"].get<std::string>();
    scene.noise.snr_db = n.value("snr_db", 20.0);
    scene.noise.seed = n.value("seed", std::uint64_t{0});
  }
  if (scene.sample_rate <= 0) throw std::invalid_argument("sample_rate must be positive");
  scene.room.Validate();
  scene.noise.Validate();
  return scene;
}

ExperimentConfig ParseExperimentConfig(const json& doc) {
  std::set<std::string> allowed = kSceneKeys;
  allowed.insert({"pipeline", "sweep", "speech", "global_seed", "repeats",
                  "vad_threshold", "methods"});
  RejectUnknown(doc, allowed, "config");

  ExperimentConfig config;
  config.scene = ParseSceneConfig(doc);
  config.truth_azimuth_deg = doc.contains("truth_azimuth_deg")
                                 ? doc["truth_azimuth_deg"].get<double>()
                                 : GeometricAzimuth(config.scene.room);
  config.global_seed = doc.value("global_seed", std::uint64_t{0});
  config.repeats = doc.value("repeats", 1);
  config.vad_threshold = doc.value("vad_threshold", 0.01);
  if (doc.contains("methods"))
    config.methods = ParseMethods(doc["methods"].get<std::string>());

  PipelineParams& p = config.pipeline;
  p.sample_rate = config.scene.sample_rate;
  p.geometry.spacing = config.scene.room.mic_spacing();
  p.geometry.speed_of_sound = config.scene.room.speed_of_sound;
  if (doc.contains("pipeline")) {
    const json& pj = doc["pipeline"];
    RejectUnknown(pj,
                  {"num_bases", "max_iters", "rel_tol", "objective", "grid_res_deg",
                   "frame_length", "hop", "normalize_factors"},
                  "pipeline");
    p.nmf.num_bases = pj.value("num_bases", p.nmf.num_bases);
    p.nmf.max_iters = pj.value("max_iters", p.nmf.max_iters);
    p.nmf.rel_tol = pj.value("rel_tol", p.nmf.rel_tol);
    const std::string objective = pj.value("objective", "kl");
    if (objective == "kl")
      p.nmf.objective = NmfObjective::kKullbackLeibler;
    else if (objective == "euclidean")
      p.nmf.objective = NmfObjective::kEuclidean;
    else
      throw std::invalid_argument("pipeline.objective must be kl or euclidean");
    p.grid_resolution_deg = pj.value("grid_res_deg", p.grid_resolution_deg);
    p.frame_length = pj.value("frame_length", p.frame_length);
    config.hop = pj.value("hop", p.frame_length / 2);
    p.normalize_factors = pj.value("normalize_factors", p.normalize_factors);
  } else {
    config.hop = p.frame_length / 2;
  }

  config.axes.snr_db = {config.scene.noise.snr_db};
  config.axes.rt60 = {config.scene.room.rt60};
  config.axes.num_bases = {p.nmf.num_bases};
  if (doc.contains("sweep")) {
    const json& s = doc["sweep"];
    RejectUnknown(s, {"snr_db", "rt60", "num_bases"}, "sweep");
    if (s.contains("snr_db")) config.axes.snr_db = ReadList<double>(s["snr_db"], "sweep.snr_db");
    if (s.contains("rt60")) config.axes.rt60 = ReadList<double>(s["rt60"], "sweep.rt60");
    if (s.contains("num_bases"))
      config.axes.num_bases = ReadList<int>(s["num_bases"], "sweep.num_bases");
  }

  if (doc.contains("speech")) {
    const json& sp = doc["speech"];
    RejectUnknown(sp, {"kind", "path", "duration"}, "speech");
    const std::string kind = sp.value("kind", "synthetic");
    if (kind == "synthetic") {
      config.speech.kind = SpeechSource::Kind::kSynthetic;
    } else if (kind == "wav_dir") {
      config.speech.kind = SpeechSource::Kind::kWavDir;
      config.speech.path = sp.at("path").get<std::string>();
    } else {
      throw std::invalid_argument("speech.kind must be synthetic or wav_dir");
    }
    config.speech.duration = sp.value("duration", config.speech.duration);
  }
  config.Validate();
  return config;
}

json LoadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

double GeometricAzimuth(const RoomConfig& room) {
  const Vec3& a = room.mics[0];
  const Vec3& b = room.mics[1];
  const double spacing = Distance(a, b);
  const Vec3 axis{(b.x - a.x) / spacing, (b.y - a.y) / spacing, (b.z - a.z) / spacing};
  const Vec3 center{(a.x + b.x) / 2, (a.y + b.y) / 2, (a.z + b.z) / 2};
  const double r = Distance(room.source, center);
  const double along = ((room.source.x - center.x) * axis.x +
                        (room.source.y - center.y) * axis.y +
                        (room.source.z - center.z) * axis.z) /
                       r;
  return -std::asin(std::clamp(along, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

double Rmse(std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw std::invalid_argument("RMSE of an empty sequence");
  double acc = 0;
  for (double e : estimates) acc += (e - truth) * (e - truth);
  return std::sqrt(acc / static_cast<double>(estimates.size()));
}

namespace {
constexpr double kAspiration = 0.01;
}  // namespace

MultichannelSignal SyntheticSpeech(double duration, int sample_rate, std::uint64_t seed) {
  if (!(duration > 0)) throw std::invalid_argument("duration must be positive");
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  const auto total = static_cast<std::size_t>(std::lround(duration * sample_rate));
  std::vector<double> x(total, 0.0);
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double fs = sample_rate;
  const double nyquist = fs / 2;
  constexpr double kTwoPi = 2 * std::numbers::pi;

  std::size_t t = static_cast<std::size_t>(uniform(0.02, 0.08) * fs);
  while (t < total) {
    // Voiced segment.
    const auto len = static_cast<std::size_t>(uniform(0.12, 0.35) * fs);
    const double f0_start = uniform(100, 300);
    const double f0_end = std::clamp(f0_start * uniform(0.8, 1.25), 100.0, 300.0);
    const double f1 = uniform(300, 900);
    const double f2 = uniform(900, 2500);
    const double f3 = uniform(2500, 3500);
    const double level = uniform(0.5, 1.0);
    double phase = 0;
    for (std::size_t i = 0; i < len && t + i < total; ++i) {
      const double frac = static_cast<double>(i) / len;
      const double f0 = f0_start + (f0_end - f0_start) * frac;
      phase += kTwoPi * f0 / fs;
      const double envelope = level * std::sin(std::numbers::pi * frac);
      // Every harmonic below Nyquist, with a 1/h tilt and three formant bumps.
      double s = 0;
      for (int h = 1; h * f0 < nyquist; ++h) {
        const double f = h * f0;
        const double formants = 0.2 + std::exp(-std::pow((f - f1) / 150.0, 2)) +
                                0.6 * std::exp(-std::pow((f - f2) / 250.0, 2)) +
                                0.3 * std::exp(-std::pow((f - f3) / 300.0, 2));
        s += formants / h * std::sin(h * phase);
      }
      // Breath noise fills the gaps between harmonics.
      s += kAspiration * gauss(rng);
      x[t + i] += envelope * s;
    }
    t += len;

    // Occasional low-passed noise burst.
    if (uniform(0, 1) < 0.3) {
      const auto burst = static_cast<std::size_t>(uniform(0.03, 0.08) * fs);
      double state = 0;
      for (std::size_t i = 0; i < burst && t + i < total; ++i) {
        state = 0.7 * state + 0.3 * gauss(rng);
        x[t + i] += 0.15 * std::sin(std::numbers::pi * i / burst) * state;
      }
      t += burst;
    }
    t += static_cast<std::size_t>(uniform(0.04, 0.15) * fs);
  }

  double peak = 0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0)
    for (double& v : x) v *= 0.9 / peak;
  MultichannelSignal out;
  out.sample_rate = sample_rate;
  out.channels.push_back(std::move(x));
  return out;
}

MultichannelSignal LoadSpeechDirectory(const std::string& dir, int sample_rate) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (entry.is_regular_file() && ext == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no .wav files in " + dir);
  MultichannelSignal out;
  out.sample_rate = sample_rate;
  out.channels.emplace_back();
  for (const auto& f : files) {
    const MultichannelSignal s = LoadWav(f.string());
    if (s.sample_rate != sample_rate)
      throw std::invalid_argument(f.string() + ": sample rate differs from scene");
    out.channels[0].insert(out.channels[0].end(), s.channels[0].begin(),
                           s.channels[0].end());
  }
  return out;
}

std::vector<bool> VoiceActivity(const MultichannelSignal& reference, int frame_length,
                                int hop, double threshold) {
  reference.Validate();
  const std::size_t count = NumFrames(reference.num_samples(), frame_length, hop);
  std::vector<double> energy(count, 0.0);
  for (std::size_t f = 0; f < count; ++f)
    for (const auto& ch : reference.channels)
      for (int n = 0; n < frame_length; ++n) {
        const double v = ch[f * hop + n];
        energy[f] += v * v;
      }
  double mean = 0;
  for (double e : energy) mean += e;
  if (count > 0) mean /= static_cast<double>(count);
  std::vector<bool> voiced(count);
  for (std::size_t f = 0; f < count; ++f)
    voiced[f] = energy[f] > 0 && energy[f] >= threshold * mean;
  return voiced;
}

Scene BuildScene(const SceneConfig& config, const MultichannelSignal& dry) {
  dry.Validate();
  if (dry.sample_rate != config.sample_rate)
    throw std::invalid_argument("source sample rate differs from scene");
  Scene scene;
  scene.reverberant.sample_rate = config.sample_rate;
  for (int m = 0; m < 2; ++m) {
    const std::vector<double> rir = ImageSourceRir(config.room, m, config.sample_rate);
    scene.reverberant.channels.push_back(Convolve(dry.channels[0], rir));
  }
  // Both RIRs share their length only when the tails match; pad to equal.
  const std::size_t len = std::max(scene.reverberant.channels[0].size(),
                                   scene.reverberant.channels[1].size());
  for (auto& ch : scene.reverberant.channels) ch.resize(len, 0.0);
  MixResult mixed = MixNoise(scene.reverberant, config.noise);
  scene.noisy = std::move(mixed.signal);
  scene.noise_tiled = mixed.noise_tiled;
  return scene;
}

std::vector<FrameResult> LocalizeSignal(const MultichannelSignal& signal,
                                        const PipelineParams& params, int hop,
                                        std::span<const Method> methods,
                                        const std::vector<bool>& voiced) {
  if (signal.sample_rate != params.sample_rate)
    throw std::invalid_argument("signal sample rate differs from pipeline");
  const std::vector<FrameSpectra> frames =
      FrameAndTransform(signal, params.frame_length, hop);
  if (!voiced.empty() && voiced.size() != frames.size())
    throw std::invalid_argument("voice activity mask length differs from frame count");

  auto silent = [](const Spectrum& x) {
    return std::all_of(x.begin(), x.end(), [](const Complex& v) { return v == Complex(); });
  };
  std::vector<std::size_t> selected;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (!voiced.empty() && !voiced[f]) continue;
    const auto& chs = frames[f].channels;
    if (silent(chs[params.geometry.mic_l]) || silent(chs[params.geometry.mic_q])) continue;
    selected.push_back(f);
  }

  const Localizer localizer(params);
  std::vector<FrameResult> results;
  for (Method method : methods) {
    std::vector<FrameResult> block(selected.size());
    ParallelFor(selected.size(), [&](std::size_t i) {
      const FrameSpectra& frame = frames[selected[i]];
      block[i].method = method;
      block[i].time_s =
          static_cast<double>(frame.frame_index) * hop / params.sample_rate;
      block[i].estimate = method == Method::kProposed
                              ? localizer.LocalizeFrame(frame)
                              : localizer.LocalizeFrameBaseline(frame);
    });
    results.insert(results.end(), block.begin(), block.end());
  }
  return results;
}

namespace {

std::string Format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void WriteFrameCsv(std::ostream& out, std::span<const FrameResult> rows) {
  std::size_t max_candidates = 0;
  for (const auto& r : rows)
    max_candidates = std::max(max_candidates, r.estimate.candidates.size());
  out << "method,frame_index,time_s,theta_source_deg,beta,peak_value";
  for (std::size_t c = 1; c <= max_candidates; ++c)
    out << ",cand" << c << "_theta_deg,cand" << c << "_peak";
  out << '\n';
  for (const auto& r : rows) {
    const AzimuthEstimate& e = r.estimate;
    out << MethodName(r.method) << ',' << e.frame_index << ','
        << Format("%.6f", r.time_s) << ',' << Format("%.4f", e.theta_source_deg) << ','
        << e.beta << ',' << Format("%.9g", e.peak_value);
    for (std::size_t c = 0; c < max_candidates; ++c) {
      if (c < e.candidates.size())
        out << ',' << Format("%.4f", e.candidates[c].theta_deg) << ','
            << Format("%.9g", e.candidates[c].peak);
      else
        out << ",,";
    }
    out << '\n';
  }
}

std::vector<FrameCsvRow> ReadFrameCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("frame CSV is empty");
  const std::vector<std::string> header = SplitCsv(line);
  const auto method_col = std::find(header.begin(), header.end(), "method");
  const auto theta_col = std::find(header.begin(), header.end(), "theta_source_deg");
  if (theta_col == header.end())
    throw std::invalid_argument("frame CSV lacks a theta_source_deg column");
  const auto theta_index = static_cast<std::size_t>(theta_col - header.begin());
  std::vector<FrameCsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = SplitCsv(line);
    if (cells.size() <= theta_index)
      throw std::invalid_argument("malformed frame CSV row: " + line);
    FrameCsvRow row;
    row.method = method_col == header.end()
                     ? "unknown"
                     : cells[static_cast<std::size_t>(method_col - header.begin())];
    try {
      row.theta_deg = std::stod(cells[theta_index]);
    } catch (const std::exception&) {
      throw std::invalid_argument("non-numeric azimuth in frame CSV: " + line);
    }
    rows.push_back(row);
  }
  return rows;
}

Scene BuildConditionScene(const ExperimentConfig& config, const Condition& condition,
                          int repeat) {
  const std::uint64_t seed = config.global_seed + static_cast<std::uint64_t>(repeat);
  SceneConfig scene = config.scene;
  scene.room.rt60 = condition.rt60;
  scene.noise.snr_db = condition.snr_db;
  scene.noise.seed = FrameSeed(seed, scene.noise.seed + 2);
  const MultichannelSignal dry =
      config.speech.kind == SpeechSource::Kind::kSynthetic
          ? SyntheticSpeech(config.speech.duration, scene.sample_rate, FrameSeed(seed, 1))
          : LoadSpeechDirectory(config.speech.path, scene.sample_rate);
  return BuildScene(scene, dry);
}

ResultTable RunCondition(const ExperimentConfig& config, const Condition& condition) {
  std::vector<std::vector<double>> estimates(config.methods.size());
  for (int r = 0; r < config.repeats; ++r) {
    const Scene scene = BuildConditionScene(config, condition, r);
    const std::vector<bool> voiced =
        VoiceActivity(scene.reverberant, config.pipeline.frame_length, config.hop,
                      config.vad_threshold);
    PipelineParams params = config.pipeline;
    params.nmf.num_bases = condition.num_bases;
    params.global_seed = config.global_seed + static_cast<std::uint64_t>(r);
    const auto results =
        LocalizeSignal(scene.noisy, params, config.hop, config.methods, voiced);
    for (const auto& fr : results) {
      const auto m = static_cast<std::size_t>(
          std::find(config.methods.begin(), config.methods.end(), fr.method) -
          config.methods.begin());
      estimates[m].push_back(fr.estimate.theta_source_deg);
    }
  }
  ResultTable table;
  for (std::size_t m = 0; m < config.methods.size(); ++m) {
    if (estimates[m].empty())
      throw DegenerateInputError("no frames pass the energy gate");
    table.push_back({condition, config.methods[m],
                     Rmse(estimates[m], config.truth_azimuth_deg), estimates[m].size()});
  }
  return table;
}

std::vector<Condition> SweepConditions(const ExperimentConfig& config) {
  std::vector<Condition> out;
  for (double snr : config.axes.snr_db)
    for (double rt60 : config.axes.rt60)
      for (int c : config.axes.num_bases) out.push_back({snr, rt60, c});
  return out;
}

ResultTable Sweep(const ExperimentConfig& config) {
  config.Validate();
  ResultTable table;
  for (const Condition& c : SweepConditions(config)) {
    const ResultTable rows = RunCondition(config, c);
    table.insert(table.end(), rows.begin(), rows.end());
  }
  return table;
}

void WriteResultCsv(std::ostream& out, const ResultTable& table) {
  out << "snr_db,rt60_ms,num_bases,method,rmse_deg,frames\n";
  for (const auto& row : table) {
    out << Format("%g", row.condition.snr_db) << ','
        << Format("%g", row.condition.rt60 * 1000.0) << ',' << row.condition.num_bases
        << ',' << MethodName(row.method) << ',' << Format("%.6f", row.rmse_deg) << ','
        << row.frames << '\n';
  }
}

}  // namespace nmfloc
