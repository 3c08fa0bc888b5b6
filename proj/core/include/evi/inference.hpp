#ifndef EVI_INFERENCE_HPP_
#define EVI_INFERENCE_HPP_

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "evi/bounds.hpp"
#include "evi/distributions.hpp"
#include "evi/matrix.hpp"
#include "evi/mixtures.hpp"
#include "evi/rng.hpp"

namespace evi {

struct Priors {
  double gamma_shape = 1.0;
  double gamma_rate = 0.01;
  double weight_concentration = 1e-3;

  void validate() const;
  GammaPosterior shape_prior() const { return {gamma_shape, gamma_rate}; }
  DirichletWeights weight_prior(std::size_t components) const;

  friend bool operator==(const Priors&, const Priors&) = default;
};

struct VariationalState {
  Matrix responsibilities;                                  // N x I
  std::vector<std::vector<GammaPosterior>> shape_posteriors;  // I x K
  DirichletWeights weight_posterior;
  BoundKind bound_kind;

  std::size_t components() const { return shape_posteriors.size(); }
  std::size_t dim() const { return shape_posteriors.front().size(); }
  ComponentExpectations expectations(std::size_t i) const {
    return ComponentExpectations::from_posteriors(shape_posteriors[i]);
  }

  // Throws ValidationError if rows do not sum to 1 (1e-9) or shapes disagree.
  void validate() const;
};

struct TraceRecord {
  int iteration;
  double surrogate;
  std::optional<double> mc_elbo;
  std::optional<double> mc_elbo_stderr;
};

VariationalState init_state(const Dataset& data, std::size_t components, const Priors& priors,
                            BoundKind kind, RngStream& rng);

VariationalState update_responsibilities(const VariationalState& state, const Dataset& data);
VariationalState update_shape_posteriors(const VariationalState& state, const Dataset& data,
                                         const Priors& priors);
VariationalState update_weights(const VariationalState& state, const Priors& priors);

double surrogate_objective(const VariationalState& state, const Dataset& data,
                           const Priors& priors);

struct EviOptions {
  int max_iters = 500;
  double rel_tol = 1e-6;

  friend bool operator==(const EviOptions&, const EviOptions&) = default;
};

struct EviResult {
  VariationalState state;
  std::vector<TraceRecord> trace;
  bool converged = false;
};

// Called after each iteration's record is filled in; may attach an MC ELBO.
using TraceMonitor = std::function<void(const VariationalState&, TraceRecord&)>;

// Coordinate ascent from a given initial state.
EviResult run_evi(VariationalState initial, const Dataset& data, const Priors& priors,
                  const EviOptions& options, const TraceMonitor& monitor = {});

EviResult run_evi(const Dataset& data, std::size_t components, const Priors& priors,
                  BoundKind kind, RngStream& rng, const EviOptions& options,
                  const TraceMonitor& monitor = {});

// Positions t (0-based, into trace) where surrogate[t] < surrogate[t-1] - tol.
std::vector<std::size_t> detect_nonmonotonicity(const std::vector<TraceRecord>& trace,
                                                double tol);
// Same with tol = rel_tol * |surrogate[t-1]|.
std::vector<std::size_t> detect_relative_decreases(const std::vector<TraceRecord>& trace,
                                                   double rel_tol);

// Columns iter,surrogate,mc_elbo,mc_elbo_stderr; empty fields when absent.
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);

}  // namespace evi

#endif  // EVI_INFERENCE_HPP_
