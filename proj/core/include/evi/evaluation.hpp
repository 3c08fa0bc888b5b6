#ifndef EVI_EVALUATION_HPP_
#define EVI_EVALUATION_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "evi/inference.hpp"
#include "evi/mixtures.hpp"
#include "evi/rng.hpp"

namespace evi {

struct McEstimate {
  double value;
  double std_error;
};

// E_q[ln p(X, pi, U) - ln q(pi, U)] with the labels summed out inside the
// mixture likelihood. Ignores state.bound_kind.
McEstimate elbo_monte_carlo(const VariationalState& state, const Dataset& data,
                            const Priors& priors, RngStream& rng, std::size_t draws);

// Posterior means of weights and shapes.
MixtureSpec point_estimate(const VariationalState& state);

// E_{x ~ truth}[ln truth(x) - ln estimate(x)]
McEstimate kl_true_vs_estimated(const MixtureSpec& truth, const MixtureSpec& estimate,
                                RngStream& rng, std::size_t draws);

struct ComparisonOptions {
  std::size_t components = 0;  // 0: use the truth's component count
  EviOptions evi;
  std::size_t elbo_draws = 10000;
  std::size_t kl_draws = 100000;
  double nonmonotone_rel_tol = 1e-8;
  unsigned threads = 0;
};

struct RoundResult {
  std::size_t round = 0;
  bool failed = false;
  std::string error;
  double l_slb = 0.0;
  double l_slb_stderr = 0.0;
  double l_mlb = 0.0;
  double l_mlb_stderr = 0.0;
  double kl_slb = 0.0;
  double kl_slb_stderr = 0.0;
  double kl_mlb = 0.0;
  double kl_mlb_stderr = 0.0;
  int iters_slb = 0;
  int iters_mlb = 0;
  std::size_t mlb_decreases = 0;
  bool excluded = false;  // MLB trace decreased; kept but left out of the means
};

struct SummaryStats {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
};

struct ComparisonReport {
  MixtureSpec truth;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<RoundResult> rounds;
  std::size_t excluded_rounds = 0;
  std::size_t failed_rounds = 0;
  SummaryStats delta_l;   // L_SLB - L_MLB over included rounds
  SummaryStats delta_kl;  // KL_SLB - KL_MLB over included rounds
};

SummaryStats summarize(std::vector<double> values);

// Per round r, streams 4r .. 4r+3 of `seed` drive data, initialization, the
// ELBO estimate and the KL estimate. Both methods start from the same state
// and share the estimator streams.
ComparisonReport compare_methods(const MixtureSpec& truth, std::size_t n, std::size_t rounds,
                                 const Priors& priors, std::uint64_t seed,
                                 const ComparisonOptions& options);

void write_report_json(std::ostream& out, const ComparisonReport& report);
void write_report_csv(std::ostream& out, const ComparisonReport& report);
// One row per statistic for box-plot style summaries.
void write_quartiles_csv(std::ostream& out, const ComparisonReport& report);

}  // namespace evi

#endif  // EVI_EVALUATION_HPP_
