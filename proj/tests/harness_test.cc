#include "nmfloc/harness.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "nmfloc/errors.h"
#include "test_util.h"

namespace nmfloc {
namespace {

using nlohmann::json;

TEST(RmseTest, Examples) {
  const std::vector<double> exact(5, 30.0);
  EXPECT_EQ(Rmse(exact, 30.0), 0.0);
  const std::vector<double> offset(7, 33.0);
  EXPECT_NEAR(Rmse(offset, 30.0), 3.0, 1e-12);
  const std::vector<double> pair{30.0, 33.0};
  EXPECT_NEAR(Rmse(pair, 30.0), std::sqrt(9.0 / 2), 1e-12);
  EXPECT_THROW(Rmse(std::vector<double>{}, 30.0), std::invalid_argument);
}

TEST(SyntheticSpeechTest, DeterministicLengthAndPeak) {
  const auto a = SyntheticSpeech(1.0, 16000, 4);
  const auto b = SyntheticSpeech(1.0, 16000, 4);
  const auto c = SyntheticSpeech(1.0, 16000, 5);
  ASSERT_EQ(a.num_channels(), 1u);
  EXPECT_EQ(a.num_samples(), 16000u);
  EXPECT_EQ(a.sample_rate, 16000);
  EXPECT_EQ(a.channels, b.channels);
  EXPECT_NE(a.channels, c.channels);
  double peak = 0;
  for (double v : a.channels[0]) peak = std::max(peak, std::abs(v));
  EXPECT_NEAR(peak, 0.9, 1e-12);
  EXPECT_THROW(SyntheticSpeech(0.0, 16000, 1), std::invalid_argument);
}

TEST(SyntheticSpeechTest, PowerConcentratedBelowFourKilohertz) {
  const auto s = SyntheticSpeech(2.0, 16000, 9).channels[0];
  const std::size_t block = 800;  // 20 Hz bins
  double below = 0, total = 0;
  for (std::size_t start = 0; start + block <= s.size(); start += block) {
    const std::vector<double> chunk(s.begin() + long(start), s.begin() + long(start + block));
    const Spectrum x = testing::NaiveDft(chunk);
    for (std::size_t k = 0; k < x.size(); ++k) {
      // One-sided spectrum: interior bins stand for two.
      const double p = std::norm(x[k]) * (k == 0 || k == block / 2 ? 1.0 : 2.0);
      total += p;
      if (k * 16000.0 / block < 4000.0) below += p;
    }
  }
  EXPECT_GE(below / total, 0.8);
}

TEST(ConfigTest, DefaultsFollowTheStandardGeometry) {
  const ExperimentConfig c = ParseExperimentConfig(json::object());
  EXPECT_EQ(c.scene.sample_rate, 16000);
  EXPECT_NEAR(c.scene.room.mic_spacing(), 0.1, 1e-12);
  EXPECT_NEAR(c.truth_azimuth_deg, 30.0, 1e-9);
  EXPECT_NEAR(GeometricAzimuth(c.scene.room), 30.0, 1e-9);
  EXPECT_EQ(c.pipeline.frame_length, 1024);
  EXPECT_EQ(c.hop, 512);
  EXPECT_EQ(c.pipeline.nmf.num_bases, 3);
  EXPECT_EQ(c.axes.snr_db, std::vector<double>{20.0});
  EXPECT_EQ(c.axes.rt60, std::vector<double>{0.0});
  EXPECT_EQ(c.methods.size(), 2u);
  EXPECT_EQ(c.vad_threshold, 0.01);
}

TEST(ConfigTest, ReadsEveryBlock) {
  const json doc = json::parse(R"({
    "room": [4, 5, 3], "mic_spacing": 0.2, "truth_azimuth_deg": -20,
    "source_distance": 1.0, "rt60": 0.2, "max_order": 4,
    "noise": {"kind": "white", "snr_db": 5, "seed": 3},
    "pipeline": {"num_bases": 5, "max_iters": 50, "grid_res_deg": 2,
                 "objective": "euclidean", "hop": 256},
    "sweep": {"snr_db": [-5, 0], "rt60": [0, 0.1, 0.3], "num_bases": [1, 2]},
    "speech": {"kind": "synthetic", "duration": 3.5},
    "global_seed": 42, "repeats": 2, "vad_threshold": 0.05, "methods": "baseline"})");
  const ExperimentConfig c = ParseExperimentConfig(doc);
  EXPECT_EQ(c.scene.room.dimensions.x, 4.0);
  EXPECT_NEAR(c.pipeline.geometry.spacing, 0.2, 1e-12);
  EXPECT_NEAR(GeometricAzimuth(c.scene.room), -20.0, 1e-9);
  EXPECT_EQ(c.truth_azimuth_deg, -20.0);
  EXPECT_EQ(c.scene.room.max_reflection_order, 4);
  EXPECT_EQ(c.scene.noise.seed, 3u);
  EXPECT_EQ(c.pipeline.nmf.num_bases, 5);
  EXPECT_EQ(c.pipeline.nmf.objective, NmfObjective::kEuclidean);
  EXPECT_EQ(c.pipeline.grid_resolution_deg, 2.0);
  EXPECT_EQ(c.hop, 256);
  EXPECT_EQ(c.axes.rt60.size(), 3u);
  EXPECT_EQ(c.axes.num_bases, (std::vector<int>{1, 2}));
  EXPECT_EQ(c.speech.duration, 3.5);
  EXPECT_EQ(c.global_seed, 42u);
  EXPECT_EQ(c.repeats, 2);
  EXPECT_EQ(c.methods, std::vector<Method>{Method::kBaseline});
  EXPECT_EQ(SweepConditions(c).size(), 12u);
}

TEST(ConfigTest, RejectsUnknownKeysAndBadValues) {
  for (const char* text :
       {R"({"snr": 3})", R"({"noise": {"level": 1}})", R"({"pipeline": {"C": 3}})",
        R"({"sweep": {"snr_db": []}})", R"({"sweep": {"num_bases": [0]}})",
        R"({"truth_azimuth_deg": 95})", R"({"speech": {"kind": "tts"}})",
        R"({"pipeline": {"objective": "is"}})", R"({"repeats": 0})",
        R"({"rt60": -1})", R"({"methods": "all"})"})
    EXPECT_THROW(ParseExperimentConfig(json::parse(text)), std::invalid_argument) << text;
}

TEST(ConfigTest, ExplicitSourceAndMics) {
  const json doc = json::parse(
      R"({"source": [1.75, 3.45, 1.25], "mics": [[1.8, 2.25, 1.25], [1.7, 2.25, 1.25]]})");
  const SceneConfig s = ParseSceneConfig(doc);
  EXPECT_NEAR(GeometricAzimuth(s.room), 0.0, 1e-9);
  EXPECT_NEAR(s.room.mic_spacing(), 0.1, 1e-12);
}

TEST(ConfigTest, SweepNestsSnrThenRt60ThenBases) {
  ExperimentConfig c;
  c.axes = {{-5, 0, 5, 10, 15, 20}, {0.0}, {3}};
  EXPECT_EQ(SweepConditions(c).size(), 6u);
  c.axes = {{0, 5}, {0.1, 0.2}, {1, 2, 3}};
  const auto conds = SweepConditions(c);
  ASSERT_EQ(conds.size(), 12u);
  EXPECT_EQ(conds[0].num_bases, 1);
  EXPECT_EQ(conds[2].num_bases, 3);
  EXPECT_EQ(conds[3].rt60, 0.2);
  EXPECT_EQ(conds[6].snr_db, 5.0);
}

TEST(VoiceActivityTest, MeanEnergyThreshold) {
  MultichannelSignal s{{std::vector<double>(4096, 0.0), std::vector<double>(4096, 0.0)}, 16000};
  for (int i = 2048; i < 4096; ++i) s.channels[0][i] = s.channels[1][i] = 0.5;
  const auto voiced = VoiceActivity(s, 1024, 512, 0.01);
  ASSERT_EQ(voiced.size(), 7u);
  EXPECT_EQ(voiced, (std::vector<bool>{false, false, false, true, true, true, true}));
  // Frame 3 is half full, and the mean is exactly half a full frame.
  EXPECT_EQ(VoiceActivity(s, 1024, 512, 1.0)[3], true);
  const auto strict = VoiceActivity(s, 1024, 512, 1.01);
  EXPECT_EQ(strict, (std::vector<bool>{false, false, false, false, true, true, true}));
}

TEST(SpeechDirectoryTest, ConcatenatesInNameOrder) {
  const testing::TempFile dir("_speech");
  std::filesystem::create_directory(dir.str());
  SaveWav(dir.str() + "/b.wav", MultichannelSignal{{{0.5, 0.5}}, 16000});
  SaveWav(dir.str() + "/a.wav", MultichannelSignal{{{0.25}}, 16000});
  const auto s = LoadSpeechDirectory(dir.str(), 16000);
  EXPECT_EQ(s.channels[0], (std::vector<double>{0.25, 0.5, 0.5}));
  EXPECT_THROW(LoadSpeechDirectory(dir.str(), 8000), std::invalid_argument);
  EXPECT_THROW(LoadSpeechDirectory(dir.str() + "/none", 16000), std::runtime_error);
  std::filesystem::remove_all(dir.str());
}

ExperimentConfig SmallConfig(double seconds) {
  ExperimentConfig c = ParseExperimentConfig(json::object());
  c.speech.duration = seconds;
  c.global_seed = 7;
  return c;
}

TEST(SceneTest, ChannelsShareLengthAndSnr) {
  const ExperimentConfig c = SmallConfig(0.5);
  const Scene s = BuildConditionScene(c, {10.0, 0.2, 3}, 0);
  ASSERT_EQ(s.noisy.num_channels(), 2u);
  EXPECT_EQ(s.noisy.channels[0].size(), s.noisy.channels[1].size());
  EXPECT_EQ(s.reverberant.channels[0].size(), s.noisy.channels[0].size());
  for (int ch = 0; ch < 2; ++ch) {
    std::vector<double> noise(s.noisy.channels[ch]);
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] -= s.reverberant.channels[ch][i];
    EXPECT_NEAR(10 * std::log10(Power(s.reverberant.channels[ch]) / Power(noise)), 10.0, 1e-9);
  }
  const Scene again = BuildConditionScene(c, {10.0, 0.2, 3}, 0);
  EXPECT_EQ(s.noisy.channels, again.noisy.channels);
  const Scene other = BuildConditionScene(c, {10.0, 0.2, 3}, 1);
  EXPECT_NE(s.noisy.channels, other.noisy.channels);
}

TEST(LocalizeSignalTest, GateIsSharedByBothMethods) {
  const ExperimentConfig c = SmallConfig(1.0);
  const Scene s = BuildConditionScene(c, {0.0, 0.0, 3}, 0);
  const auto voiced = VoiceActivity(s.reverberant, 1024, 512, c.vad_threshold);
  const std::vector<Method> both{Method::kProposed, Method::kBaseline};
  const auto rows = LocalizeSignal(s.noisy, c.pipeline, c.hop, both, voiced);
  ASSERT_EQ(rows.size() % 2, 0u);
  const std::size_t half = rows.size() / 2;
  std::size_t expected = 0;
  for (bool v : voiced) expected += v;
  EXPECT_EQ(half, expected);
  EXPECT_LT(half, voiced.size());
  for (std::size_t i = 0; i < half; ++i) {
    EXPECT_EQ(rows[i].method, Method::kProposed);
    EXPECT_EQ(rows[half + i].method, Method::kBaseline);
    EXPECT_EQ(rows[i].estimate.frame_index, rows[half + i].estimate.frame_index);
    EXPECT_TRUE(voiced[rows[i].estimate.frame_index]);
    EXPECT_EQ(rows[i].time_s, rows[i].estimate.frame_index * 512 / 16000.0);
  }
}

TEST(RunConditionTest, SinglePointGivesTwoRowsDeterministically) {
  ExperimentConfig c = SmallConfig(0.6);
  c.pipeline.nmf.max_iters = 30;
  const ResultTable a = Sweep(c), b = Sweep(c);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].method, Method::kProposed);
  EXPECT_EQ(a[1].method, Method::kBaseline);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].rmse_deg, b[i].rmse_deg);
    EXPECT_EQ(a[i].frames, b[i].frames);
    EXPECT_GT(a[i].frames, 0u);
    EXPECT_GE(a[i].rmse_deg, 0.0);
  }
  EXPECT_EQ(a[0].frames, a[1].frames);
}

TEST(RunConditionTest, SnrAxisOfSixGivesTwelveRows) {
  ExperimentConfig c = SmallConfig(0.4);
  c.pipeline.nmf.max_iters = 10;
  c.axes.snr_db = {-5, 0, 5, 10, 15, 20};
  const ResultTable t = Sweep(c);
  ASSERT_EQ(t.size(), 12u);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t[i].condition.snr_db, c.axes.snr_db[i / 2]);
}

TEST(RunConditionTest, NoVoicedFrameIsDegenerate) {
  ExperimentConfig c = SmallConfig(0.4);
  c.vad_threshold = 1e9;
  EXPECT_THROW(RunCondition(c, {20.0, 0.0, 3}), DegenerateInputError);
}

TEST(RunConditionTest, NearCleanSceneBothMethodsWithinThreeDegrees) {
  ExperimentConfig c = SmallConfig(2.0);
  const ResultTable t = RunCondition(c, {60.0, 0.0, 3});
  ASSERT_EQ(t.size(), 2u);
  for (const auto& row : t) EXPECT_LT(row.rmse_deg, 3.0) << MethodName(row.method);
}

TEST(RunConditionTest, NoiseDoesNotHelpOverFiveSeeds) {
  ExperimentConfig c = SmallConfig(0.7);
  c.repeats = 5;
  const ResultTable quiet = RunCondition(c, {20.0, 0.0, 3});
  const ResultTable loud = RunCondition(c, {-5.0, 0.0, 3});
  for (std::size_t m = 0; m < quiet.size(); ++m) {
    EXPECT_EQ(quiet[m].frames, loud[m].frames);
    EXPECT_LE(quiet[m].rmse_deg, loud[m].rmse_deg) << MethodName(quiet[m].method);
  }
}

TEST(CsvTest, ResultColumns) {
  ResultTable t{{{-5.0, 0.1, 3}, Method::kProposed, 1.25, 40},
                {{20.0, 0.0, 10}, Method::kBaseline, 0.5, 12}};
  std::ostringstream out;
  WriteResultCsv(out, t);
  EXPECT_EQ(out.str(),
            "snr_db,rt60_ms,num_bases,method,rmse_deg,frames\n"
            "-5,100,3,proposed,1.250000,40\n"
            "20,0,10,baseline,0.500000,12\n");
}

TEST(CsvTest, FrameCsvRoundTrip) {
  AzimuthEstimate e1;
  e1.theta_source_deg = 30;
  e1.beta = 2;
  e1.peak_value = 0.5;
  e1.candidates = {{-10, 0.1}, {30, 0.5}};
  e1.frame_index = 4;
  AzimuthEstimate e2;
  e2.theta_source_deg = -12.5;
  e2.frame_index = 4;
  const std::vector<FrameResult> rows{{Method::kProposed, 0.128, e1},
                                      {Method::kBaseline, 0.128, e2}};
  std::stringstream csv;
  WriteFrameCsv(csv, rows);
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header,
            "method,frame_index,time_s,theta_source_deg,beta,peak_value,"
            "cand1_theta_deg,cand1_peak,cand2_theta_deg,cand2_peak");
  csv.seekg(0);
  const auto back = ReadFrameCsv(csv);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].method, "proposed");
  EXPECT_EQ(back[0].theta_deg, 30.0);
  EXPECT_EQ(back[1].method, "baseline");
  EXPECT_EQ(back[1].theta_deg, -12.5);

  std::istringstream empty(""), no_theta("method,beta\nproposed,1\n"),
      bad("method,theta_source_deg\nproposed,abc\n");
  EXPECT_THROW(ReadFrameCsv(empty), std::invalid_argument);
  EXPECT_THROW(ReadFrameCsv(no_theta), std::invalid_argument);
  EXPECT_THROW(ReadFrameCsv(bad), std::invalid_argument);
}

TEST(MethodTest, Names) {
  EXPECT_STREQ(MethodName(Method::kProposed), "proposed");
  EXPECT_STREQ(MethodName(Method::kBaseline), "baseline");
  EXPECT_EQ(ParseMethods("both").size(), 2u);
  EXPECT_EQ(ParseMethods("proposed"), std::vector<Method>{Method::kProposed});
  EXPECT_THROW(ParseMethods("music"), std::invalid_argument);
}

}  // namespace
}  // namespace nmfloc
