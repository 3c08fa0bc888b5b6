#ifndef EVI_BOUNDS_HPP_
#define EVI_BOUNDS_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "evi/distributions.hpp"
#include "evi/rng.hpp"

namespace evi {

enum class BoundKind { kSlbWeak, kMlbStrong };

const char* to_string(BoundKind kind);
BoundKind bound_kind_from_string(const std::string& name);

// Posterior moments of one component's shape vector, one entry per dimension.
struct ComponentExpectations {
  std::vector<double> mean;
  std::vector<double> mean_log;
  std::vector<double> var_log;

  static ComponentExpectations from_posteriors(std::span<const GammaPosterior> q);
  // Point mass at u: E[ln u] = ln u, no spread.
  static ComponentExpectations point_mass(std::span<const double> u);

  std::size_t dim() const { return mean.size(); }
  // E[ln u_k] - ln ubar_k, always <= 0 for a proper posterior.
  double log_deviation(std::size_t k) const;
  // E[(ln u_k - ln ubar_k)^2]
  double second_moment_log(std::size_t k) const;
};

// ln Gamma(sum u) - sum ln Gamma(u_k)
double exact_lib(std::span<const double> u);

double slb_bound(const ComponentExpectations& ce);

// K = 2 only. target_dim 0 bounds the u update, 1 the v update; the cross
// term carries the log deviation of the other dimension.
double mlb_u_bound(const ComponentExpectations& ce, std::size_t target_dim);
double mlb_v_bound(const ComponentExpectations& ce);
double mlb_z_bound(const ComponentExpectations& ce);

// Closed-form differences; both are non-negative in exact arithmetic.
double slb_minus_mlb_u(const ComponentExpectations& ce);
double slb_minus_mlb_z(const ComponentExpectations& ce);

// The bound the z-step and the reported surrogate use for this kind.
double z_bound(const ComponentExpectations& ce, BoundKind kind);

// Coefficient of E[ln u_k] used in the conjugate shape update for dimension k.
// SLB: ubar_k [psi(sum ubar) - psi(ubar_k)]. MLB adds
// ubar_k ubar_o psi'(sum ubar) (E[ln u_o] - ln ubar_o) with o the other
// dimension (K = 2 only).
double shape_coefficient(const ComponentExpectations& ce, std::size_t k, BoundKind kind);

enum class GapBound { kSlb, kMlbU, kMlbV, kMlbZ };

const char* to_string(GapBound which);

struct GapEstimate {
  double mean;
  double std_error;
};

// Monte Carlo estimate of E_q[exact_lib(u)] - bound(ce) with u ~ q.
GapEstimate measure_gap(std::span<const GammaPosterior> q, GapBound which, RngStream& rng,
                        std::size_t draws);

// exact_lib evaluated from ln u, usable when some u_k underflow.
double exact_lib_from_log(std::span<const double> log_u);

}  // namespace evi

#endif  // EVI_BOUNDS_HPP_
