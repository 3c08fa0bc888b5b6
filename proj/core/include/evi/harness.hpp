#ifndef EVI_HARNESS_HPP_
#define EVI_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evi/bounds.hpp"
#include "evi/evaluation.hpp"
#include "evi/inference.hpp"
#include "evi/mixtures.hpp"

namespace evi {

enum class ExperimentKind { kTraceStudy, kComparison, kBoundSweep };

const char* to_string(ExperimentKind kind);

struct SweepSettings {
  std::size_t configs = 100000;     // closed-form difference checks
  std::size_t gap_configs = 1000;   // Monte Carlo gap measurements
  std::size_t gap_draws = 10000;

  friend bool operator==(const SweepSettings&, const SweepSettings&) = default;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kTraceStudy;
  std::string preset;               // label only; truth holds the parameters
  std::optional<MixtureSpec> truth; // required except for bound-sweep
  std::size_t n = 400;
  std::size_t rounds = 10;
  std::size_t components = 0;       // 0: truth's component count
  std::uint64_t seed = 1;
  std::vector<BoundKind> bound_kinds;
  Priors priors;
  EviOptions evi;
  std::size_t trace_mc_draws = 0;   // MC ELBO per trace iteration; 0 disables
  std::size_t elbo_draws = 10000;
  std::size_t kl_draws = 100000;
  SweepSettings sweep;
  unsigned threads = 0;             // 0: hardware concurrency
  std::string output_dir = "evi-out";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// JSON document -> validated config with defaults applied. Throws ConfigError
// naming the line/column (syntax) or field path (validation).
ExperimentConfig parse_config(const std::string& text);
std::string serialize_config(const ExperimentConfig& config);

// Names: model-a-bmm, model-b-bmm, model-b-dmm.
std::vector<std::string> preset_names();
MixtureSpec preset_truth(const std::string& name);
ExperimentConfig preset_config(const std::string& name, ExperimentKind kind, std::uint64_t seed,
                               const std::string& output_dir);

struct TraceRun {
  BoundKind kind;
  std::size_t round;
  std::vector<TraceRecord> trace;
  bool converged;
  std::vector<std::size_t> decreases;  // relative tolerance 1e-8
};

struct TraceStudyResult {
  std::vector<TraceRun> runs;  // ordered by round, then bound kind
  std::vector<Dataset> datasets;
};

// Round r draws its dataset from stream 3r and its initial responsibilities
// from stream 3r+1 of `seed`; every bound kind starts from that same state.
// Stream 3r+2 feeds the optional per-iteration MC ELBO.
TraceStudyResult run_trace_study(const MixtureSpec& truth, std::size_t n, std::size_t rounds,
                                 const std::vector<BoundKind>& kinds, std::uint64_t seed,
                                 const Priors& priors, const EviOptions& evi,
                                 std::size_t components, std::size_t trace_mc_draws,
                                 unsigned threads);

struct BoundSweepResult {
  std::size_t configs = 0;
  std::size_t mlb_u_violations = 0;
  std::size_t mlb_z_violations = 0;
  double min_slb_minus_mlb_u = 0.0;
  double min_slb_minus_mlb_z = 0.0;
};

// Closed-form difference checks over `configs` Beta posteriors with shapes and
// rates log-uniform in [0.1, 100]; config i uses stream i.
BoundSweepResult run_bound_sweep(std::size_t configs, std::uint64_t seed, unsigned threads);

struct GapConfig {
  double mean_u, mean_v;
  double shape_u, shape_v;
};

struct GapRow {
  GapConfig config;
  GapEstimate slb;
  GapEstimate mlb_z;
  bool weak_ok;     // slb gap >= -3 stderr
  bool ordering_ok; // mlb_z gap >= slb gap - 3 combined stderr
};

struct GapStudyResult {
  std::vector<GapRow> rows;
  std::size_t weak_violations = 0;
  std::size_t ordering_violations = 0;
};

// Posterior means log-uniform in [mean_lo, mean_hi], shapes log-uniform in
// [0.1, 100]. Each bound gets its own Monte Carlo stream.
GapStudyResult run_gap_study(std::size_t configs, std::size_t draws, double mean_lo,
                             double mean_hi, std::uint64_t seed, unsigned threads);

struct Assertion {
  std::string name;
  bool passed;
  std::string detail;
};

struct ExperimentOutcome {
  std::vector<std::string> files;  // relative to output_dir, manifest last
  std::vector<Assertion> assertions;
  int exit_code = 0;               // 0 all assertions hold, 1 otherwise
};

// Runs the experiment and writes every artifact under config.output_dir,
// finishing with manifest.json.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

}  // namespace evi

#endif  // EVI_HARNESS_HPP_
