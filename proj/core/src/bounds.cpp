#include "evi/bounds.hpp"

#include <cmath>
#include <string>

#include "evi/errors.hpp"
#include "evi/special.hpp"

namespace evi {
namespace {

void require_beta(const ComponentExpectations& ce, const char* who) {
  if (ce.dim() != 2) {
    throw UnsupportedDimension(std::string(who) + ": defined for K = 2 only, got K = " +
                               std::to_string(ce.dim()));
  }
}

// ln Gamma(e^l). Below e^-30 the shifted form ln Gamma(1 + x) - ln x is
// -l to double precision, and exp(l) may have underflowed.
double ln_gamma_at_log(double l) {
  if (l < -30.0) return -l;
  return ln_gamma(std::exp(l));
}

}  // namespace

const char* to_string(BoundKind kind) {
  return kind == BoundKind::kSlbWeak ? "slb" : "mlb";
}

BoundKind bound_kind_from_string(const std::string& name) {
  if (name == "slb") return BoundKind::kSlbWeak;
  if (name == "mlb") return BoundKind::kMlbStrong;
  throw ValidationError("unknown bound kind '" + name + "' (expected slb or mlb)");
}

const char* to_string(GapBound which) {
  switch (which) {
    case GapBound::kSlb: return "slb";
    case GapBound::kMlbU: return "mlb_u";
    case GapBound::kMlbV: return "mlb_v";
    case GapBound::kMlbZ: return "mlb_z";
  }
  return "?";
}

ComponentExpectations ComponentExpectations::from_posteriors(std::span<const GammaPosterior> q) {
  ComponentExpectations ce;
  ce.mean.reserve(q.size());
  ce.mean_log.reserve(q.size());
  ce.var_log.reserve(q.size());
  for (const auto& g : q) {
    ce.mean.push_back(g.mean());
    ce.mean_log.push_back(g.mean_log());
    ce.var_log.push_back(g.var_log());
  }
  return ce;
}

ComponentExpectations ComponentExpectations::point_mass(std::span<const double> u) {
  ComponentExpectations ce;
  for (double x : u) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("point_mass: u must be positive");
    ce.mean.push_back(x);
    ce.mean_log.push_back(std::log(x));
    ce.var_log.push_back(0.0);
  }
  return ce;
}

double ComponentExpectations::log_deviation(std::size_t k) const {
  return mean_log[k] - std::log(mean[k]);
}

double ComponentExpectations::second_moment_log(std::size_t k) const {
  const double d = log_deviation(k);
  return var_log[k] + d * d;
}

double exact_lib(std::span<const double> u) {
  if (u.empty()) throw DomainError("exact_lib: empty vector");
  for (double x : u) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("exact_lib: entries must be positive");
  }
  return log_inverse_beta_unchecked(u.data(), static_cast<int>(u.size()));
}

double exact_lib_from_log(std::span<const double> log_u) {
  double total = 0.0;
  double acc = 0.0;
  for (double l : log_u) {
    total += std::exp(l);
    acc -= ln_gamma_at_log(l);
  }
  return acc + ln_gamma(total);
}

double slb_bound(const ComponentExpectations& ce) {
  double total = 0.0;
  for (double m : ce.mean) total += m;
  const double psi_total = digamma(total);
  double acc = log_inverse_beta_unchecked(ce.mean.data(), static_cast<int>(ce.dim()));
  for (std::size_t k = 0; k < ce.dim(); ++k) {
    acc += ce.mean[k] * (psi_total - digamma(ce.mean[k])) * ce.log_deviation(k);
  }
  return acc;
}

double mlb_u_bound(const ComponentExpectations& ce, std::size_t target_dim) {
  require_beta(ce, "mlb_u_bound");
  if (target_dim > 1) throw ValidationError("mlb_u_bound: target_dim must be 0 or 1");
  const double u = ce.mean[0];
  const double v = ce.mean[1];
  const std::size_t other = 1 - target_dim;
  return slb_bound(ce) + u * v * trigamma(u + v) * ce.log_deviation(other);
}

double mlb_v_bound(const ComponentExpectations& ce) { return mlb_u_bound(ce, 1); }

double mlb_z_bound(const ComponentExpectations& ce) {
  require_beta(ce, "mlb_z_bound");
  return slb_bound(ce) - slb_minus_mlb_z(ce);
}

double slb_minus_mlb_u(const ComponentExpectations& ce) {
  require_beta(ce, "slb_minus_mlb_u");
  const double u = ce.mean[0];
  const double v = ce.mean[1];
  return -u * v * trigamma(u + v) * ce.log_deviation(1);
}

double slb_minus_mlb_z(const ComponentExpectations& ce) {
  require_beta(ce, "slb_minus_mlb_z");
  const double u = ce.mean[0];
  const double v = ce.mean[1];
  const double t = trigamma(u + v);
  const double extra = 0.5 * u * u * (t - trigamma(u)) * ce.second_moment_log(0) +
                       0.5 * v * v * (t - trigamma(v)) * ce.second_moment_log(1) +
                       u * v * t * ce.log_deviation(0) * ce.log_deviation(1);
  return -extra;
}

double z_bound(const ComponentExpectations& ce, BoundKind kind) {
  return kind == BoundKind::kSlbWeak ? slb_bound(ce) : mlb_z_bound(ce);
}

double shape_coefficient(const ComponentExpectations& ce, std::size_t k, BoundKind kind) {
  double total = 0.0;
  for (double m : ce.mean) total += m;
  double coef = ce.mean[k] * (digamma(total) - digamma(ce.mean[k]));
  if (kind == BoundKind::kMlbStrong) {
    require_beta(ce, "shape_coefficient");
    const std::size_t other = 1 - k;
    coef += ce.mean[k] * ce.mean[other] * trigamma(total) * ce.log_deviation(other);
  }
  return coef;
}

GapEstimate measure_gap(std::span<const GammaPosterior> q, GapBound which, RngStream& rng,
                        std::size_t draws) {
  if (draws < 1000) throw ValidationError("measure_gap: draws must be >= 1000");
  const auto ce = ComponentExpectations::from_posteriors(q);
  double bound = 0.0;
  switch (which) {
    case GapBound::kSlb: bound = slb_bound(ce); break;
    case GapBound::kMlbU: bound = mlb_u_bound(ce, 0); break;
    case GapBound::kMlbV: bound = mlb_u_bound(ce, 1); break;
    case GapBound::kMlbZ: bound = mlb_z_bound(ce); break;
  }
  std::vector<double> log_u(q.size());
  // Welford; the gap is small next to E[exact_lib] so center on the bound.
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    for (std::size_t k = 0; k < q.size(); ++k) {
      log_u[k] = sample_log_gamma(q[k].shape(), q[k].rate(), rng);
    }
    const double x = exact_lib_from_log(log_u) - bound;
    const double delta = x - mean;
    mean += delta / static_cast<double>(d + 1);
    m2 += delta * (x - mean);
  }
  const double n = static_cast<double>(draws);
  return {mean, std::sqrt(m2 / (n - 1.0) / n)};
}

}  // namespace evi
