#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <gtest/gtest.h>
#include <sstream>
#include <string>

#include "evi/errors.hpp"
#include "evi/harness.hpp"
#include "json.hpp"

namespace evi {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("evi_harness_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(ParseConfig, MinimalTraceStudyDefaults) {
  const auto c = parse_config(R"({"kind": "trace-study", "preset": "model-a-bmm"})");
  EXPECT_EQ(c.kind, ExperimentKind::kTraceStudy);
  EXPECT_EQ(c.n, 400u);
  EXPECT_EQ(c.rounds, 10u);
  ASSERT_TRUE(c.truth.has_value());
  EXPECT_EQ(*c.truth, preset_truth("model-a-bmm"));
  EXPECT_EQ(c.bound_kinds.size(), 2u);
  EXPECT_EQ(c.priors, Priors{});
  EXPECT_EQ(c.evi.max_iters, 500);
  EXPECT_DOUBLE_EQ(c.evi.rel_tol, 1e-6);
}

TEST(ParseConfig, ComparisonDefaults) {
  const auto c = parse_config(R"({"kind": "comparison", "preset": "model-b-bmm"})");
  EXPECT_EQ(c.n, 2000u);
  EXPECT_EQ(c.rounds, 20u);
  EXPECT_EQ(c.elbo_draws, 10000u);
  EXPECT_EQ(c.kl_draws, 100000u);
}

TEST(ParseConfig, DirichletPresetDefaultsToSlbOnly) {
  const auto c = parse_config(R"({"kind": "trace-study", "preset": "model-b-dmm"})");
  ASSERT_EQ(c.bound_kinds.size(), 1u);
  EXPECT_EQ(c.bound_kinds[0], BoundKind::kSlbWeak);
  EXPECT_NE(config_error(R"({"kind": "trace-study", "preset": "model-b-dmm",
                             "bound_kinds": ["mlb"]})")
                .find("bound_kinds"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"kind": "comparison", "preset": "model-b-dmm"})").find("truth"),
            std::string::npos);
}

TEST(ParseConfig, ValidationNamesField) {
  const std::string msg = config_error(R"({"kind": "trace-study",
    "truth": {"weights": [0.5, 0.5], "shapes": [[2, 3], [4, -1]]}})");
  EXPECT_NE(msg.find("truth.shapes[1][1]"), std::string::npos) << msg;
  EXPECT_NE(config_error(R"({"kind": "trace-study", "preset": "model-a-bmm", "n": -3})").find("'n'"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"kind": "trace-study", "preset": "model-a-bmm",
                             "priors": {"gamma_rate": 0}})")
                .find("priors.gamma_rate"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"kind": "trace-study"})").find("truth"), std::string::npos);
  EXPECT_NE(config_error(R"({"kind": "sideways"})").find("kind"), std::string::npos);
  EXPECT_NE(config_error(R"({"kind": "trace-study", "preset": "model-z"})").find("preset"),
            std::string::npos);
}

TEST(ParseConfig, RejectsUnknownKeys) {
  EXPECT_NE(config_error(R"({"kind": "trace-study", "preset": "model-a-bmm", "nn": 4})").find("nn"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"kind": "trace-study", "preset": "model-a-bmm",
                             "iterations": {"max_iter": 4}})")
                .find("iterations.max_iter"),
            std::string::npos);
}

TEST(ParseConfig, SyntaxErrorHasLocation) {
  const std::string msg = config_error("{\n  \"kind\": \"trace-study\",\n  \"n\": 4,,\n}");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("column"), std::string::npos) << msg;
}

TEST(ParseConfig, RoundTrip) {
  const auto c = parse_config(R"({
    "kind": "comparison",
    "truth": {"weights": [0.25, 0.75], "shapes": [[1.5, 9], [12, 3.25]]},
    "n": 321, "rounds": 4, "seed": 18446744073709551615, "components": 2,
    "priors": {"gamma_shape": 2, "gamma_rate": 0.1, "weight_concentration": 0.5},
    "iterations": {"max_iters": 77, "rel_tol": 1e-7},
    "elbo_draws": 2000, "kl_draws": 3000, "threads": 2, "output_dir": "x/y"})");
  EXPECT_EQ(c.seed, 18446744073709551615ULL);
  const auto again = parse_config(serialize_config(c));
  EXPECT_EQ(again, c);
  EXPECT_EQ(serialize_config(again), serialize_config(c));
}

TEST(Presets, AllNamesResolve) {
  for (const auto& name : preset_names()) {
    EXPECT_NO_THROW(preset_truth(name));
    EXPECT_NO_THROW(preset_config(name, ExperimentKind::kTraceStudy, 3, "out"));
  }
  EXPECT_THROW(preset_truth("model-c"), ValidationError);
  EXPECT_EQ(preset_truth("model-b-dmm").dim(), 3u);
}

ExperimentConfig small_trace_config(const fs::path& out, unsigned threads) {
  auto c = parse_config(R"({"kind": "trace-study", "preset": "model-a-bmm", "rounds": 3,
                            "n": 150, "iterations": {"max_iters": 80}})");
  c.output_dir = out.string();
  c.threads = threads;
  return c;
}

TEST(RunExperiment, TraceStudyFilesAndManifest) {
  const fs::path out = scratch_dir("trace");
  const auto outcome = run_experiment(small_trace_config(out, 1));
  ASSERT_FALSE(outcome.files.empty());
  EXPECT_EQ(outcome.files.back(), "manifest.json");
  for (const auto& f : outcome.files) EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_TRUE(fs::exists(out / "traces/slb_round_000.csv"));
  EXPECT_TRUE(fs::exists(out / "traces/mlb_round_002.csv"));
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["config_format"], "json");
  EXPECT_EQ(manifest["files"].size(), outcome.files.size() - 1);
  // The echoed config parses back to the same experiment.
  const auto echo = parse_config(slurp(out / "config.effective.json"));
  EXPECT_EQ(echo.n, 150u);
  EXPECT_EQ(echo.output_dir, ".");
  fs::remove_all(out);
}

TEST(RunExperiment, OutputIndependentOfThreadCount) {
  const fs::path a = scratch_dir("threads1");
  const fs::path b = scratch_dir("threads3");
  run_experiment(small_trace_config(a, 1));
  run_experiment(small_trace_config(b, 3));
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    EXPECT_EQ(slurp(entry.path()), slurp(b / rel)) << rel;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(RunExperiment, BoundSweepSmall) {
  const fs::path out = scratch_dir("sweep");
  ExperimentConfig c;
  c.kind = ExperimentKind::kBoundSweep;
  c.sweep.configs = 2000;
  c.sweep.gap_configs = 20;
  c.sweep.gap_draws = 1000;
  c.output_dir = out.string();
  const auto outcome = run_experiment(c);
  EXPECT_EQ(outcome.exit_code, 0);
  const auto summary = nlohmann::json::parse(slurp(out / "sweep_summary.json"));
  EXPECT_EQ(summary["slb_minus_mlb_z"]["violations"], 0);
  EXPECT_TRUE(fs::exists(out / "gap_study.csv"));
  fs::remove_all(out);
}

TEST(BoundSweep, ShardingDoesNotChangeResults) {
  const auto a = run_bound_sweep(3000, 9, 1);
  const auto b = run_bound_sweep(3000, 9, 4);
  EXPECT_EQ(a.min_slb_minus_mlb_z, b.min_slb_minus_mlb_z);
  EXPECT_EQ(a.mlb_u_violations, 0u);
  EXPECT_EQ(a.mlb_z_violations, 0u);
}

#ifdef EVI_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string(EVI_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << R"({"kind": "trace-study", "preset": "model-a-bmm", "bogus": 1})";
  EXPECT_EQ(run_cli("run " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run_cli("run " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(run_cli("preset nonexistent --out " + (dir / "x").string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  std::ofstream(dir / "ok.json") << R"({"kind": "bound-sweep", "sweep": {"configs": 100,
      "gap_configs": 0}, "output_dir": "sweep-out"})";
  EXPECT_EQ(run_cli("run " + (dir / "ok.json").string()), 0);
  EXPECT_TRUE(fs::exists(fs::current_path() / "sweep-out/manifest.json"));
  fs::remove_all(fs::current_path() / "sweep-out");
  // Relative output directories land under EVI_OUTPUT_ROOT when it is set.
  const std::string env = "EVI_OUTPUT_ROOT=" + dir.string() + " ";
  const std::string cmd = env + EVI_CLI_PATH + " sweep --configs 100 --gap-configs 0 --out rooted >/dev/null 2>&1";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "rooted/manifest.json"));
  fs::remove_all(dir);
}
#endif

}  // namespace
}  // namespace evi
