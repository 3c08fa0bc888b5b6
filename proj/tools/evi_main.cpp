// evi: run beta/Dirichlet mixture EVI experiments.
//
//   evi run <config.json>
//   evi preset <name> [--out DIR] [--seed S] [--kind trace-study|comparison|bound-sweep]
//   evi sweep --configs N --seed S --out DIR
//
// Relative output directories are resolved against $EVI_OUTPUT_ROOT when set.
// Exit status: 0 success, 1 an embedded assertion failed, 2 config error,
// 3 runtime error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "evi/errors.hpp"
#include "evi/harness.hpp"

namespace {

constexpr int kExitAssertion = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::string resolve_output(const std::string& dir) {
  std::filesystem::path p(dir);
  if (p.is_absolute()) return p.string();
  if (const char* root = std::getenv("EVI_OUTPUT_ROOT"); root && *root) {
    return (std::filesystem::path(root) / p).string();
  }
  return p.string();
}

evi::ExperimentKind parse_kind(const std::string& s) {
  if (s == "trace-study") return evi::ExperimentKind::kTraceStudy;
  if (s == "comparison") return evi::ExperimentKind::kComparison;
  if (s == "bound-sweep") return evi::ExperimentKind::kBoundSweep;
  throw evi::ConfigError("unknown experiment kind '" + s + "'");
}

int execute(evi::ExperimentConfig config) {
  config.output_dir = resolve_output(config.output_dir);
  std::cerr << "evi: " << evi::to_string(config.kind) << " -> " << config.output_dir << "\n";
  const evi::ExperimentOutcome outcome = evi::run_experiment(config);
  for (const auto& a : outcome.assertions) {
    std::cout << (a.passed ? "PASS " : "FAIL ") << a.name << ": " << a.detail << "\n";
  }
  std::cout << "wrote " << outcome.files.size() << " files to " << config.output_dir << "\n";
  return outcome.exit_code == 0 ? 0 : kExitAssertion;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extended variational inference for beta/Dirichlet mixtures"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("config", config_path, "Config file")->required();

  std::string preset_name;
  std::string preset_out;
  std::uint64_t preset_seed = 1;
  std::string preset_kind = "trace-study";
  auto* preset = app.add_subcommand("preset", "Run a built-in model by name");
  preset->add_option("name", preset_name, "model-a-bmm, model-b-bmm or model-b-dmm")->required();
  preset->add_option("--out", preset_out, "Output directory (default: <name>-<kind>)");
  preset->add_option("--seed", preset_seed, "Seed")->capture_default_str();
  preset->add_option("--kind", preset_kind, "trace-study, comparison or bound-sweep")
      ->capture_default_str();

  std::size_t sweep_configs = 100000;
  std::size_t sweep_gap_configs = 1000;
  std::size_t sweep_gap_draws = 10000;
  std::uint64_t sweep_seed = 1;
  std::string sweep_out = "bound-sweep";
  auto* sweep = app.add_subcommand("sweep", "Bound-inequality sweep and gap measurements");
  sweep->add_option("--configs", sweep_configs, "Closed-form configurations")
      ->capture_default_str();
  sweep->add_option("--gap-configs", sweep_gap_configs, "Monte Carlo gap configurations")
      ->capture_default_str();
  sweep->add_option("--gap-draws", sweep_gap_draws, "Draws per gap estimate")
      ->capture_default_str();
  sweep->add_option("--seed", sweep_seed, "Seed")->capture_default_str();
  sweep->add_option("--out", sweep_out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      std::ifstream in(config_path);
      if (!in) throw evi::ConfigError("cannot read config file " + config_path);
      std::ostringstream text;
      text << in.rdbuf();
      return execute(evi::parse_config(text.str()));
    }
    if (*preset) {
      const auto kind = parse_kind(preset_kind);
      if (preset_out.empty()) preset_out = preset_name + "-" + preset_kind;
      return execute(evi::preset_config(preset_name, kind, preset_seed, preset_out));
    }
    evi::ExperimentConfig config;
    config.kind = evi::ExperimentKind::kBoundSweep;
    config.seed = sweep_seed;
    config.sweep.configs = sweep_configs;
    config.sweep.gap_configs = sweep_gap_configs;
    config.sweep.gap_draws = sweep_gap_draws;
    config.output_dir = sweep_out;
    config.bound_kinds = {evi::BoundKind::kSlbWeak, evi::BoundKind::kMlbStrong};
    if (sweep_configs < 1) throw evi::ConfigError("--configs must be >= 1");
    if (sweep_gap_draws < 1000) throw evi::ConfigError("--gap-draws must be >= 1000");
    return execute(config);
  } catch (const evi::ConfigError& e) {
    std::cerr << "evi: " << e.what() << "\n";
    return kExitConfig;
  } catch (const evi::ValidationError& e) {
    std::cerr << "evi: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "evi: error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
