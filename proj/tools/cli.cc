#include "cli.h"

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nmfloc/errors.h"
#include "nmfloc/harness.h"
#include "nmfloc/room_sim.h"
#include "nmfloc/signal_io.h"

namespace nmfloc {

namespace {

struct Flags {
  std::string config;
  std::string in;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string method = "both";
  std::optional<double> grid_res;
  std::optional<int> bases;
  std::optional<double> truth;
  std::optional<double> spacing;
  std::optional<double> vad_threshold;
};

// Invalid configuration content; reported as a usage error, not a runtime one.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename F>
auto CheckedConfig(F&& parse) {
  try {
    return parse();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

SceneConfig LoadScene(const std::string& path) {
  return CheckedConfig([&] { return ParseSceneConfig(LoadJsonFile(path)); });
}

// Sends CSV text to --out, or to `out` when no path was given.
void Emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path);
  file << text;
  if (!file) throw std::runtime_error("cannot write " + path);
}

void WarnIfClamped(const RoomConfig& room, std::ostream& err) {
  if (room.rt60 > 0 && Rt60ToAbsorption(room.rt60, room.dimensions).clamped)
    err << "warning: rt60 too short for this room; absorption clamped to 1\n";
}

ExperimentConfig ResolveExperiment(const Flags& flags) {
  return CheckedConfig([&] {
    ExperimentConfig config = ParseExperimentConfig(LoadJsonFile(flags.config));
    if (flags.seed) config.global_seed = *flags.seed;
    if (flags.grid_res) config.pipeline.grid_resolution_deg = *flags.grid_res;
    if (flags.bases) {
      config.pipeline.nmf.num_bases = *flags.bases;
      config.axes.num_bases = {*flags.bases};
    }
    config.methods = ParseMethods(flags.method);
    config.Validate();
    return config;
  });
}

int RunRir(const Flags& flags, std::ostream& /*out*/, std::ostream& err) {
  const SceneConfig scene = LoadScene(flags.config);
  CheckedConfig([&] { scene.room.Validate(); return 0; });
  WarnIfClamped(scene.room, err);
  MultichannelSignal rirs;
  rirs.sample_rate = scene.sample_rate;
  for (int m = 0; m < 2; ++m)
    rirs.channels.push_back(ImageSourceRir(scene.room, m, scene.sample_rate));
  const std::size_t len = std::max(rirs.channels[0].size(), rirs.channels[1].size());
  for (auto& ch : rirs.channels) ch.resize(len, 0.0);
  SaveWav(flags.out, rirs);
  return kExitOk;
}

int RunSimulate(const Flags& flags, std::ostream& /*out*/, std::ostream& err) {
  const ExperimentConfig config = ResolveExperiment(flags);
  const Condition condition{config.axes.snr_db.front(), config.axes.rt60.front(),
                            config.axes.num_bases.front()};
  SceneConfig scene = config.scene;
  scene.room.rt60 = condition.rt60;
  WarnIfClamped(scene.room, err);
  const Scene built = BuildConditionScene(config, condition, 0);
  if (built.noise_tiled) err << "warning: noise file shorter than signal; tiled\n";
  SaveWav(flags.out, built.noisy);
  return kExitOk;
}

int RunLocalize(const Flags& flags, std::ostream& out, std::ostream& /*err*/) {
  PipelineParams params;
  int hop = params.frame_length / 2;
  double vad = 0.01;
  if (!flags.config.empty()) {
    const ExperimentConfig config = ResolveExperiment(flags);
    params = config.pipeline;
    hop = config.hop;
    vad = config.vad_threshold;
    params.global_seed = config.global_seed;
  }
  const MultichannelSignal signal = LoadWav(flags.in);
  if (signal.num_channels() < 2)
    throw DegenerateInputError(flags.in + ": need at least two channels");
  params.sample_rate = signal.sample_rate;
  if (flags.seed) params.global_seed = *flags.seed;
  if (flags.grid_res) params.grid_resolution_deg = *flags.grid_res;
  if (flags.bases) params.nmf.num_bases = *flags.bases;
  if (flags.spacing) params.geometry.spacing = *flags.spacing;
  if (flags.vad_threshold) vad = *flags.vad_threshold;

  const std::vector<Method> methods = ParseMethods(flags.method);
  const std::vector<bool> voiced = VoiceActivity(signal, params.frame_length, hop, vad);
  const auto results = LocalizeSignal(signal, params, hop, methods, voiced);
  std::ostringstream csv;
  WriteFrameCsv(csv, results);
  Emit(flags.out, csv.str(), out);
  return kExitOk;
}

int RunEvaluate(const Flags& flags, std::ostream& out, std::ostream& /*err*/) {
  double truth = 0;
  if (flags.truth) {
    truth = *flags.truth;
  } else {
    truth = ResolveExperiment(flags).truth_azimuth_deg;
  }
  std::ifstream in(flags.in);
  if (!in) throw std::runtime_error("cannot open " + flags.in);
  const std::vector<FrameCsvRow> rows = ReadFrameCsv(in);
  std::map<std::string, std::vector<double>> by_method;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (!by_method.count(r.method)) order.push_back(r.method);
    by_method[r.method].push_back(r.theta_deg);
  }
  if (order.empty()) throw DegenerateInputError("frame CSV has no rows");
  std::ostringstream csv;
  csv << "method,rmse_deg,frames\n";
  for (const auto& m : order) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", Rmse(by_method[m], truth));
    csv << m << ',' << buf << ',' << by_method[m].size() << '\n';
  }
  Emit(flags.out, csv.str(), out);
  return kExitOk;
}

int RunSweep(const Flags& flags, std::ostream& out, std::ostream& /*err*/) {
  const ExperimentConfig config = ResolveExperiment(flags);
  const ResultTable table = Sweep(config);
  std::ostringstream csv;
  WriteResultCsv(csv, table);
  Emit(flags.out, csv.str(), out);
  return kExitOk;
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"NMF subband-decomposition GCC-PHAT source localization"};
  app.name("nmfloc");
  app.require_subcommand(1);
  Flags flags;

  auto add_config = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--config", flags.config, "JSON scene/experiment document");
    if (required) opt->required();
    opt->check(CLI::ExistingFile);
  };
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", flags.seed, "Global seed (overrides config)");
  };
  auto add_pipeline = [&](CLI::App* sub) {
    sub->add_option("--method", flags.method, "proposed | baseline | both")
        ->check(CLI::IsMember({"proposed", "baseline", "both"}));
    sub->add_option("--grid-res", flags.grid_res, "Azimuth grid resolution in degrees")
        ->check(CLI::Range(1e-3, 180.0));
    sub->add_option("--bases", flags.bases, "Number of delay basis vectors C")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* rir = app.add_subcommand("rir", "Write the two-microphone RIR pair as WAV");
  add_config(rir, true);
  rir->add_option("--out", flags.out, "Output WAV")->required();

  CLI::App* simulate = app.add_subcommand("simulate", "Write a noisy two-channel scene WAV");
  add_config(simulate, true);
  add_seed(simulate);
  simulate->add_option("--out", flags.out, "Output WAV")->required();

  CLI::App* localize = app.add_subcommand("localize", "Per-frame azimuths of a WAV as CSV");
  localize->add_option("--in", flags.in, "Two-channel WAV")->required()->check(CLI::ExistingFile);
  add_config(localize, false);
  add_seed(localize);
  add_pipeline(localize);
  localize->add_option("--spacing", flags.spacing, "Microphone spacing in metres")
      ->check(CLI::PositiveNumber);
  localize->add_option("--vad-threshold", flags.vad_threshold,
                       "Energy gate as a fraction of the mean frame energy")
      ->check(CLI::Range(0.0, 1e9));
  localize->add_option("--out", flags.out, "Output CSV (default stdout)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "RMSE of a per-frame CSV");
  evaluate->add_option("--in", flags.in, "Per-frame CSV")->required()->check(CLI::ExistingFile);
  auto* truth = evaluate->add_option("--truth", flags.truth, "True azimuth in degrees")
                    ->check(CLI::Range(-90.0, 90.0));
  add_config(evaluate, false);
  evaluate->add_option("--out", flags.out, "Output CSV (default stdout)");

  CLI::App* sweep = app.add_subcommand("sweep", "Run a configured sweep and write result CSV");
  add_config(sweep, true);
  add_seed(sweep);
  add_pipeline(sweep);
  sweep->add_option("--out", flags.out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
    if (evaluate->parsed() && truth->count() == 0 && flags.config.empty())
      throw CLI::RequiredError("evaluate needs --truth or --config");
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (rir->parsed()) return RunRir(flags, out, err);
    if (simulate->parsed()) return RunSimulate(flags, out, err);
    if (localize->parsed()) return RunLocalize(flags, out, err);
    if (evaluate->parsed()) return RunEvaluate(flags, out, err);
    if (sweep->parsed()) return RunSweep(flags, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace nmfloc
