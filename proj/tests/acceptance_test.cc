// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. argv[1] is the path of the nmfloc executable; further
// arguments restrict the run to the listed criterion numbers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nmfloc/gcc_core.h"
#include "nmfloc/harness.h"
#include "nmfloc/localization.h"
#include "nmfloc/nmf.h"
#include "nmfloc/room_sim.h"
#include "nmfloc/signal_io.h"
#include "test_util.h"

namespace nmfloc {
namespace {

constexpr int kFs = 16000;
constexpr int kN = 1024;
constexpr double kDegPerRad = 180.0 / std::numbers::pi;

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Eigen::MatrixXd RandomNonNegative(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = u(rng);
  return m;
}

Verdict NmfMonotonicity() {
  const Clock clock;
  const int bases[] = {1, 3, 5};
  double worst_rise = -INFINITY;
  for (int trial = 0; trial < 50; ++trial) {
    // Every fifth trial has the full 181 x 513 frame size.
    const int rows = trial % 5 == 0 ? 181 : 6 + (trial * 37) % 176;
    const int cols = trial % 5 == 0 ? 513 : 6 + (trial * 101) % 508;
    NmfOptions o;
    o.num_bases = bases[trial % 3];
    o.max_iters = 200;
    o.rel_tol = 0.0;
    o.seed = static_cast<std::uint64_t>(trial);
    const auto trace =
        NmfFactorize(RandomNonNegative(rows, cols, 1000 + trial), o).objective_trace;
    for (std::size_t i = 1; i < trace.size(); ++i)
      worst_rise = std::max(worst_rise, trace[i] - trace[i - 1]);
  }
  const double elapsed = clock.seconds();
  std::ostringstream d;
  d << "largest per-iteration change " << worst_rise << " (slack 1e-10), " << elapsed
    << " s (limit 60 s)";
  return {worst_rise <= 1e-10 && elapsed < 60.0, d.str()};
}

Verdict RankOneRecovery() {
  const Clock clock;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Eigen::VectorXd w(181), h(513);
  for (auto& x : w) x = u(rng);
  for (auto& x : h) x = u(rng);
  const Eigen::MatrixXd v = w * h.transpose();
  NmfOptions o;
  o.num_bases = 1;
  o.max_iters = 500;
  o.rel_tol = 0.0;
  const double error = (Reconstruct(NmfFactorize(v, o)) - v).norm();
  const double elapsed = clock.seconds();
  std::ostringstream d;
  d << "Frobenius error " << error << " (limit 1e-6), " << elapsed << " s (limit 5 s)";
  return {error <= 1e-6 && elapsed < 5.0, d.str()};
}

Verdict TdeOracleEquivalence() {
  const Clock clock;
  const PipelineParams params;
  const Localizer localizer(params);
  const ArrayGeometry& g = params.geometry;
  double worst = 0;
  bool oracle_ok = true;
  for (int delay = -4; delay <= 4; ++delay) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const MultichannelSignal pair =
          testing::DelayedPair(kN, delay, seed * 100 + std::uint64_t(delay + 4));
      const int lag = testing::CrossCorrelationLag(pair.channels[0], pair.channels[1], 8);
      oracle_ok = oracle_ok && lag == delay;
      const double truth = std::asin(g.speed_of_sound * lag / kFs / g.spacing) * kDegPerRad;
      const FrameSpectra frame = FrameAndTransform(pair, kN, kN).front();
      for (const AzimuthEstimate& e :
           {localizer.LocalizeFrameBaseline(frame), localizer.LocalizeFrame(frame)})
        worst = std::max(worst, std::abs(e.theta_source_deg - truth));
    }
  }
  const double elapsed = clock.seconds();
  std::ostringstream d;
  d << "cross-correlation oracle lag equals D: " << (oracle_ok ? "yes" : "no")
    << "; worst |estimate - asin(gamma D / fs / d)| " << worst << " deg (limit 1 deg), "
    << elapsed << " s (limit 30 s)";
  return {oracle_ok && worst <= 1.0 && elapsed < 30.0, d.str()};
}

Verdict UniformWeightReduction() {
  const SteeringTable table(AzimuthGrid::Uniform(1.0), ArrayGeometry{}, kN, kFs);
  const std::vector<double> ones(kN / 2 + 1, 1.0);
  double worst = 0;
  for (std::uint64_t f = 0; f < 100; ++f) {
    const MultichannelSignal s{{testing::RandomSignal(kN, 2 * f + 1),
                                testing::RandomSignal(kN, 2 * f + 2)},
                               kFs};
    const FrameSpectra frame = FrameAndTransform(s, kN, kN).front();
    const Spectrum phat = PhatCrossSpectrum(frame.channels[0], frame.channels[1]);
    const std::vector<double> want = GccPhatCurve(phat, table);
    const std::vector<double> got = WeightedGcc(phat, ones, table);
    double scale = 0;
    for (double v : want) scale = std::max(scale, std::abs(v));
    for (std::size_t a = 0; a < want.size(); ++a)
      worst = std::max(worst, std::abs(got[a] - want[a]) / scale);
  }
  std::ostringstream d;
  d << "worst relative difference " << worst << " over 100 frames (limit 1e-12)";
  return {worst <= 1e-12, d.str()};
}

ExperimentConfig SceneExperiment(double duration, int repeats) {
  ExperimentConfig c = ParseExperimentConfig(nlohmann::json::object());
  c.speech.duration = duration;
  c.repeats = repeats;
  c.global_seed = 2024;
  return c;
}

Verdict HeadlineImprovement() {
  const Clock clock;
  const ExperimentConfig c = SceneExperiment(3.0, 3);
  const ResultTable t = RunCondition(c, {-5.0, 0.1, 3});
  const double proposed = t[0].rmse_deg, baseline = t[1].rmse_deg;
  const double elapsed = clock.seconds();
  std::ostringstream d;
  d << "-5 dB, RT60 100 ms, 3 seeds, " << t[0].frames << " voiced frames (need >= 200): "
    << "proposed " << proposed << " deg, baseline " << baseline << " deg, ratio "
    << proposed / baseline << " (limit 0.5), " << elapsed << " s (limit 300 s)";
  return {t[0].frames >= 200 && proposed <= 0.5 * baseline && elapsed < 300.0, d.str()};
}

Verdict BasisCountShape() {
  const ExperimentConfig c = SceneExperiment(2.0, 3);
  const double at3 = RunCondition(c, {20.0, 0.0, 3})[0].rmse_deg;
  const double at10 = RunCondition(c, {20.0, 0.0, 10})[0].rmse_deg;
  std::ostringstream d;
  d << "20 dB anechoic, 3 seeds: RMSE(C=3) " << at3 << " deg, RMSE(C=10) " << at10 << " deg";
  return {at3 <= at10, d.str()};
}

// Local maxima of the conventional curve within 1% of its maximum, for a
// bin-centred tone from 30 degrees transformed without a window.
std::size_t TonePeaks(double freq) {
  const ArrayGeometry g;
  const double tau = DelayOfAzimuth(30.0, g);
  RealDft dft(kN);
  const Spectrum xl = dft.Forward(testing::Tone(freq, kN, kFs));
  const Spectrum xq = dft.Forward(testing::Tone(freq, kN, kFs, -2 * std::numbers::pi * freq * tau));
  const auto curve = GccPhatCurve(PhatCrossSpectrum(xl, xq), AzimuthGrid::Uniform(1.0), g, kFs);
  const double top = *std::max_element(curve.begin(), curve.end());
  std::size_t peaks = 0;
  for (std::size_t a = 0; a < curve.size(); ++a) {
    const bool left = a == 0 || curve[a] >= curve[a - 1];
    const bool right = a + 1 == curve.size() || curve[a] >= curve[a + 1];
    if (left && right && curve[a] >= top - 0.01 * std::abs(top)) ++peaks;
  }
  return peaks;
}

Verdict SpatialAliasing() {
  const std::size_t high = TonePeaks(3000.0), low = TonePeaks(1000.0);
  std::ostringstream d;
  d << "aliasing limit " << AliasingLimit(ArrayGeometry{}) << " Hz; 3 kHz tone " << high
    << " peaks (need >= 2), 1 kHz tone " << low << " peaks (need 1)";
  return {high >= 2 && low == 1, d.str()};
}

// 3 x the time for the Schroeder curve to fall from -5 to -25 dB.
double SchroederRt60(const std::vector<double>& h) {
  std::vector<double> edc(h.size());
  double acc = 0;
  for (std::size_t i = h.size(); i-- > 0;) {
    acc += h[i] * h[i];
    edc[i] = acc;
  }
  double t5 = -1, t25 = -1;
  for (std::size_t i = 0; i < edc.size(); ++i) {
    const double db = 10 * std::log10(edc[i] / edc[0]);
    if (t5 < 0 && db <= -5) t5 = double(i) / kFs;
    if (t25 < 0 && db <= -25) t25 = double(i) / kFs;
  }
  return 3 * (t25 - t5);
}

Verdict RirPhysics() {
  RoomConfig room = StandardGeometry(30.0, 1.2, 0.1);
  room.rt60 = 0.5;
  // Every image arriving within the requested decay time.
  room.max_reflection_order = ReflectionOrderCovering(room.dimensions, room.rt60);
  const auto h0 = ImageSourceRir(room, 0, kFs), h1 = ImageSourceRir(room, 1, kFs);
  auto peak = [](const std::vector<double>& h) {
    return double(std::max_element(h.begin(), h.end()) - h.begin());
  };
  const double tdoa = peak(h1) - peak(h0);
  const double expected = 0.1 * std::sin(30.0 / kDegPerRad) / 343.0 * kFs;
  const double rt60 = SchroederRt60(h0);
  const bool tdoa_ok = std::abs(tdoa - expected) <= 1.0;
  const bool rt60_ok = std::abs(rt60 - 0.5) <= 0.3 * 0.5;
  std::ostringstream d;
  d << "direct-path TDOA " << tdoa << " samples vs " << expected << " (limit 1 sample): "
    << (tdoa_ok ? "ok" : "off") << "; Schroeder RT60 (T20, order "
    << room.max_reflection_order << ") " << rt60 << " s vs 0.5 s (limit +-30%): "
    << (rt60_ok ? "ok" : "off");
  return {tdoa_ok && rt60_ok, d.str()};
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Verdict SweepDeterminism(const std::string& cli) {
  if (cli.empty()) return {false, "no nmfloc executable given"};
  const testing::TempFile config(".json"), a(".csv"), b(".csv");
  std::ofstream(config.str()) << R"({"speech": {"duration": 1.0}, "rt60": 0.1,
    "sweep": {"snr_db": [0, 20]}, "global_seed": 11})";
  auto run = [&](const std::string& out) {
    const std::string cmd = "\"" + cli + "\" sweep --config \"" + config.str() + "\" --out \"" +
                            out + "\"";
    return std::system(cmd.c_str());
  };
  const int ra = run(a.str()), rb = run(b.str());
  const std::string ca = ReadFile(a.str()), cb = ReadFile(b.str());
  const bool same = ra == 0 && rb == 0 && !ca.empty() && ca == cb;
  std::ostringstream d;
  d << "two sweep runs exit " << ra << "/" << rb << ", " << ca.size() << " bytes, "
    << (ca == cb ? "byte-identical" : "different");
  return {same, d.str()};
}

}  // namespace
}  // namespace nmfloc

int main(int argc, char** argv) {
  using namespace nmfloc;
  const std::string cli = argc > 1 ? argv[1] : "";
  struct Criterion {
    const char* name;
    Verdict (*run)(const std::string&);
  };
  const Criterion criteria[] = {
      {"NMF KL monotonicity", [](const std::string&) { return NmfMonotonicity(); }},
      {"rank-1 recovery", [](const std::string&) { return RankOneRecovery(); }},
      {"TDE oracle equivalence", [](const std::string&) { return TdeOracleEquivalence(); }},
      {"uniform-weight reduction", [](const std::string&) { return UniformWeightReduction(); }},
      {"2x improvement at -5 dB", [](const std::string&) { return HeadlineImprovement(); }},
      {"C-sweep shape", [](const std::string&) { return BasisCountShape(); }},
      {"spatial aliasing", [](const std::string&) { return SpatialAliasing(); }},
      {"RIR physical check", [](const std::string&) { return RirPhysics(); }},
      {"sweep determinism", [](const std::string& c) { return SweepDeterminism(c); }},
  };
  std::vector<int> only;
  for (int i = 2; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  int failures = 0, index = 0, ran = 0;
  std::cout << std::setprecision(4);
  for (const Criterion& c : criteria) {
    ++index;
    if (!only.empty() && std::find(only.begin(), only.end(), index) == only.end()) continue;
    ++ran;
    Verdict v;
    try {
      v = c.run(cli);
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << index << ": " << c.name
              << " | " << v.detail << std::endl;
  }
  std::cout << (ran - failures) << "/" << ran << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
