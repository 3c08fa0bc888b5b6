#include "evi/inference.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "evi/errors.hpp"
#include "text.hpp"

namespace evi {
namespace {

constexpr double kCoefficientFloor = 1e-10;
constexpr double kDegenerateFraction = 1e-8;

void check_compatible(const VariationalState& state, const Dataset& data) {
  if (state.responsibilities.rows() != data.size() ||
      state.responsibilities.cols() != state.components() || state.dim() != data.dim()) {
    throw ValidationError("state does not match dataset shape");
  }
}

// sum_n r_ni ln x_nk, indexed [i][k]
std::vector<std::vector<double>> weighted_log_sums(const Matrix& r, const Dataset& data) {
  std::vector<std::vector<double>> out(r.cols(), std::vector<double>(data.dim(), 0.0));
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto lx = data.log_point(n);
    for (std::size_t i = 0; i < r.cols(); ++i) {
      const double w = r(n, i);
      for (std::size_t k = 0; k < lx.size(); ++k) out[i][k] += w * lx[k];
    }
  }
  return out;
}

}  // namespace

void Priors::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string("priors.") + name + " must be positive");
    }
  };
  check(gamma_shape, "gamma_shape");
  check(gamma_rate, "gamma_rate");
  check(weight_concentration, "weight_concentration");
}

DirichletWeights Priors::weight_prior(std::size_t components) const {
  return DirichletWeights(std::vector<double>(components, weight_concentration));
}

void VariationalState::validate() const {
  if (shape_posteriors.empty()) throw ValidationError("state has no components");
  const std::size_t k = shape_posteriors.front().size();
  for (const auto& row : shape_posteriors) {
    if (row.size() != k) throw ValidationError("state shape rows differ in length");
  }
  if (responsibilities.cols() != shape_posteriors.size() ||
      weight_posterior.size() != shape_posteriors.size()) {
    throw ValidationError("state component counts disagree");
  }
  for (std::size_t n = 0; n < responsibilities.rows(); ++n) {
    double sum = 0.0;
    for (double v : responsibilities.row(n)) {
      if (!(v >= 0.0)) throw ValidationError("negative or NaN responsibility at row " +
                                             std::to_string(n));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("responsibility row " + std::to_string(n) + " sums to " +
                            text::format_double(sum));
    }
  }
}

VariationalState init_state(const Dataset& data, std::size_t components, const Priors& priors,
                            BoundKind kind, RngStream& rng) {
  priors.validate();
  if (components == 0) throw ValidationError("init_state: components must be >= 1");
  if (data.size() < components) {
    throw ValidationError("init_state: need at least as many observations as components");
  }
  Matrix r(data.size(), components, 1.0);
  if (components > 1) {
    const std::vector<double> ones(components, 1.0);
    for (std::size_t n = 0; n < data.size(); ++n) {
      const auto draw = sample_dirichlet(ones, rng);
      std::copy(draw.begin(), draw.end(), r.row(n).begin());
    }
  }
  auto sums = r.column_sums();
  for (double& s : sums) s += priors.weight_concentration;
  std::vector<std::vector<GammaPosterior>> shapes(
      components, std::vector<GammaPosterior>(data.dim(), priors.shape_prior()));
  return VariationalState{std::move(r), std::move(shapes), DirichletWeights(std::move(sums)),
                          kind};
}

VariationalState update_responsibilities(const VariationalState& state, const Dataset& data) {
  check_compatible(state, data);
  const std::size_t comps = state.components();
  const std::size_t k = state.dim();
  const auto e_log_pi = state.weight_posterior.expect_log();
  std::vector<double> offset(comps);
  std::vector<std::vector<double>> exponent(comps, std::vector<double>(k));
  for (std::size_t i = 0; i < comps; ++i) {
    const auto ce = state.expectations(i);
    offset[i] = e_log_pi[i] + z_bound(ce, state.bound_kind);
    for (std::size_t j = 0; j < k; ++j) exponent[i][j] = ce.mean[j] - 1.0;
  }
  VariationalState next = state;
  std::vector<double> logits(comps);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto lx = data.log_point(n);
    double top = -INFINITY;
    for (std::size_t i = 0; i < comps; ++i) {
      double v = offset[i];
      for (std::size_t j = 0; j < k; ++j) v += exponent[i][j] * lx[j];
      logits[i] = v;
      top = std::max(top, v);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < comps; ++i) {
      logits[i] = std::exp(logits[i] - top);
      norm += logits[i];
    }
    auto row = next.responsibilities.row(n);
    for (std::size_t i = 0; i < comps; ++i) row[i] = logits[i] / norm;
  }
  return next;
}

VariationalState update_shape_posteriors(const VariationalState& state, const Dataset& data,
                                         const Priors& priors) {
  check_compatible(state, data);
  VariationalState next = state;
  const auto counts = state.responsibilities.column_sums();
  const auto log_sums = weighted_log_sums(state.responsibilities, data);
  const double floor_count = kDegenerateFraction * static_cast<double>(data.size());
  for (std::size_t i = 0; i < state.components(); ++i) {
    auto& row = next.shape_posteriors[i];
    if (counts[i] < floor_count) {
      std::fill(row.begin(), row.end(), priors.shape_prior());
      continue;
    }
    // One dimension at a time, each reading the dimensions already updated.
    for (std::size_t k = 0; k < row.size(); ++k) {
      const auto ce = ComponentExpectations::from_posteriors(row);
      const double coef = std::max(kCoefficientFloor, shape_coefficient(ce, k, state.bound_kind));
      row[k] = GammaPosterior(priors.gamma_shape + counts[i] * coef,
                              priors.gamma_rate - log_sums[i][k]);
    }
  }
  return next;
}

VariationalState update_weights(const VariationalState& state, const Priors& priors) {
  VariationalState next = state;
  auto c = state.responsibilities.column_sums();
  for (double& v : c) v += priors.weight_concentration;
  next.weight_posterior = DirichletWeights(std::move(c));
  return next;
}

double surrogate_objective(const VariationalState& state, const Dataset& data,
                           const Priors& priors) {
  check_compatible(state, data);
  const Matrix& r = state.responsibilities;
  const auto counts = r.column_sums();
  const auto log_sums = weighted_log_sums(r, data);
  const auto e_log_pi = state.weight_posterior.expect_log();
  double total = 0.0;
  for (std::size_t i = 0; i < state.components(); ++i) {
    const auto ce = state.expectations(i);
    double term = counts[i] * (e_log_pi[i] + z_bound(ce, state.bound_kind));
    for (std::size_t k = 0; k < ce.dim(); ++k) term += (ce.mean[k] - 1.0) * log_sums[i][k];
    total += term;
  }
  double entropy = 0.0;
  for (double v : r.data()) {
    if (v > 0.0) entropy -= v * std::log(v);
  }
  total += entropy;
  total -= dirichlet_kl(state.weight_posterior, priors.weight_prior(state.components()));
  const auto prior = priors.shape_prior();
  for (const auto& row : state.shape_posteriors) {
    for (const auto& q : row) total -= gamma_kl(q, prior);
  }
  return total;
}

EviResult run_evi(VariationalState initial, const Dataset& data, const Priors& priors,
                  const EviOptions& options, const TraceMonitor& monitor) {
  if (options.max_iters < 1) throw ValidationError("max_iters must be >= 1");
  if (!(options.rel_tol > 0.0)) throw ValidationError("rel_tol must be positive");
  priors.validate();
  initial.validate();
  check_compatible(initial, data);

  EviResult result{std::move(initial), {}, false};
  VariationalState& state = result.state;
  for (int it = 0; it < options.max_iters; ++it) {
    // The initial shape posteriors are the prior and carry no information, so
    // the first sweep enters the cycle at the shape update.
    if (it > 0) state = update_responsibilities(state, data);
    state = update_shape_posteriors(state, data, priors);
    state = update_weights(state, priors);

    TraceRecord rec{it + 1, surrogate_objective(state, data, priors), std::nullopt, std::nullopt};
    if (!std::isfinite(rec.surrogate)) {
      throw ValidationError("surrogate became non-finite at iteration " + std::to_string(it + 1));
    }
    if (monitor) monitor(state, rec);
    result.trace.push_back(rec);

    if (result.trace.size() >= 2) {
      const double prev = result.trace[result.trace.size() - 2].surrogate;
      const double change = rec.surrogate - prev;
      const double scale = options.rel_tol * std::abs(rec.surrogate);
      const bool small = std::abs(change) < scale;
      // Under MLB a decrease is recorded but never counts as convergence.
      if (small && (state.bound_kind == BoundKind::kSlbWeak || change >= 0.0)) {
        result.converged = true;
        break;
      }
    }
  }
  return result;
}

EviResult run_evi(const Dataset& data, std::size_t components, const Priors& priors,
                  BoundKind kind, RngStream& rng, const EviOptions& options,
                  const TraceMonitor& monitor) {
  return run_evi(init_state(data, components, priors, kind, rng), data, priors, options, monitor);
}

std::vector<std::size_t> detect_nonmonotonicity(const std::vector<TraceRecord>& trace,
                                                double tol) {
  if (trace.empty()) throw ValidationError("detect_nonmonotonicity: empty trace");
  std::vector<std::size_t> out;
  for (std::size_t t = 1; t < trace.size(); ++t) {
    if (trace[t].surrogate < trace[t - 1].surrogate - tol) out.push_back(t);
  }
  return out;
}

std::vector<std::size_t> detect_relative_decreases(const std::vector<TraceRecord>& trace,
                                                   double rel_tol) {
  if (trace.empty()) throw ValidationError("detect_relative_decreases: empty trace");
  std::vector<std::size_t> out;
  for (std::size_t t = 1; t < trace.size(); ++t) {
    const double prev = trace[t - 1].surrogate;
    if (trace[t].surrogate < prev - rel_tol * std::abs(prev)) out.push_back(t);
  }
  return out;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << "iter,surrogate,mc_elbo,mc_elbo_stderr\n";
  for (const auto& rec : trace) {
    out << rec.iteration << ',' << text::format_double(rec.surrogate) << ',';
    if (rec.mc_elbo) out << text::format_double(*rec.mc_elbo);
    out << ',';
    if (rec.mc_elbo_stderr) out << text::format_double(*rec.mc_elbo_stderr);
    out << '\n';
  }
}

}  // namespace evi
