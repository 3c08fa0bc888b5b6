#include "evi/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "evi/errors.hpp"
#include "evi/special.hpp"

namespace evi {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

bool positive_finite(double x) { return x > 0.0 && std::isfinite(x); }

double log_sum_exp(std::span<const double> v) {
  const double top = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - top);
  return top + std::log(acc);
}

// Marsaglia & Tsang, shape >= 1, unit rate.
double marsaglia_tsang(double shape, RngStream& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace

GammaPosterior::GammaPosterior(double shape, double rate) : shape_(shape), rate_(rate) {
  require(positive_finite(shape) && positive_finite(rate),
          "GammaPosterior: shape and rate must be positive, got (" + std::to_string(shape) +
              ", " + std::to_string(rate) + ")");
}

double GammaPosterior::mean_log() const { return digamma(shape_) - std::log(rate_); }

double GammaPosterior::var_log() const { return trigamma(shape_); }

double GammaPosterior::log_pdf(double x) const {
  require(positive_finite(x), "GammaPosterior::log_pdf: x must be positive");
  return log_pdf_at_log(std::log(x));
}

double GammaPosterior::log_pdf_at_log(double log_x) const {
  return shape_ * std::log(rate_) - ln_gamma(shape_) + (shape_ - 1.0) * log_x -
         rate_ * std::exp(log_x);
}

DirichletWeights::DirichletWeights(std::vector<double> concentration)
    : concentration_(std::move(concentration)) {
  require(!concentration_.empty(), "DirichletWeights: empty concentration");
  for (double c : concentration_) {
    require(positive_finite(c), "DirichletWeights: concentration entries must be positive");
  }
}

double DirichletWeights::total() const {
  return std::accumulate(concentration_.begin(), concentration_.end(), 0.0);
}

std::vector<double> DirichletWeights::expect_log() const {
  const double psi_total = digamma(total());
  std::vector<double> out(concentration_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = digamma(concentration_[i]) - psi_total;
  return out;
}

std::vector<double> DirichletWeights::mean() const {
  const double t = total();
  std::vector<double> out(concentration_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = concentration_[i] / t;
  return out;
}

double beta_log_pdf(double x, double u, double v) {
  require(x > 0.0 && x < 1.0, "beta_log_pdf: x must lie in (0, 1)");
  require(positive_finite(u) && positive_finite(v), "beta_log_pdf: shapes must be positive");
  return ln_gamma(u + v) - ln_gamma(u) - ln_gamma(v) + (u - 1.0) * std::log(x) +
         (v - 1.0) * std::log1p(-x);
}

double dirichlet_log_pdf(std::span<const double> x, std::span<const double> u) {
  require(x.size() == u.size() && x.size() >= 2,
          "dirichlet_log_pdf: x and u must have equal length >= 2");
  double sum = 0.0;
  for (double xi : x) {
    require(xi > 0.0 && xi < 1.0, "dirichlet_log_pdf: x must be interior to the simplex");
    sum += xi;
  }
  require(std::abs(sum - 1.0) <= 1e-12, "dirichlet_log_pdf: x must sum to 1");
  for (double ui : u) require(positive_finite(ui), "dirichlet_log_pdf: u must be positive");
  double acc = log_inverse_beta_unchecked(u.data(), static_cast<int>(u.size()));
  for (std::size_t k = 0; k < x.size(); ++k) acc += (u[k] - 1.0) * std::log(x[k]);
  return acc;
}

double dirichlet_log_pdf_at_log(std::span<const double> log_x, std::span<const double> u) {
  require(log_x.size() == u.size() && !u.empty(), "dirichlet_log_pdf_at_log: size mismatch");
  double acc = log_inverse_beta_unchecked(u.data(), static_cast<int>(u.size()));
  for (std::size_t k = 0; k < u.size(); ++k) acc += (u[k] - 1.0) * log_x[k];
  return acc;
}

double sample_gamma(double shape, double rate, RngStream& rng) {
  require(positive_finite(shape) && positive_finite(rate),
          "sample_gamma: shape and rate must be positive");
  if (shape < 1.0) {
    // Boost: G(a) = G(a + 1) * U^(1/a).
    const double g = marsaglia_tsang(shape + 1.0, rng);
    return g * std::pow(rng.uniform_open(), 1.0 / shape) / rate;
  }
  return marsaglia_tsang(shape, rng) / rate;
}

double sample_log_gamma(double shape, double rate, RngStream& rng) {
  require(positive_finite(shape) && positive_finite(rate),
          "sample_log_gamma: shape and rate must be positive");
  if (shape < 1.0) {
    const double g = marsaglia_tsang(shape + 1.0, rng);
    return std::log(g) + std::log(rng.uniform_open()) / shape - std::log(rate);
  }
  return std::log(marsaglia_tsang(shape, rng)) - std::log(rate);
}

std::vector<double> sample_log_dirichlet(std::span<const double> u, RngStream& rng) {
  require(!u.empty(), "sample_dirichlet: empty parameter vector");
  std::vector<double> out(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) out[k] = sample_log_gamma(u[k], 1.0, rng);
  const double norm = log_sum_exp(out);
  for (double& v : out) v -= norm;
  return out;
}

std::vector<double> sample_dirichlet(std::span<const double> u, RngStream& rng) {
  std::vector<double> out = sample_log_dirichlet(u, rng);
  for (double& v : out) v = std::exp(v);
  return out;
}

double sample_beta(double u, double v, RngStream& rng) {
  const double params[2] = {u, v};
  return sample_dirichlet(params, rng)[0];
}

std::size_t sample_categorical(std::span<const double> weights, RngStream& rng) {
  require(!weights.empty(), "sample_categorical: empty weights");
  double sum = 0.0;
  for (double w : weights) {
    require(w >= 0.0 && std::isfinite(w), "sample_categorical: weights must be non-negative");
    sum += w;
  }
  require(std::abs(sum - 1.0) <= 1e-9, "sample_categorical: weights must sum to 1");
  const double target = rng.uniform() * sum;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cumulative += weights[i];
    if (target < cumulative) return i;
  }
  // Rounding left target at the very top; return the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

double gamma_kl(const GammaPosterior& q, const GammaPosterior& p) {
  const double aq = q.shape();
  const double bq = q.rate();
  const double ap = p.shape();
  const double bp = p.rate();
  const double kl = (aq - ap) * digamma(aq) - ln_gamma(aq) + ln_gamma(ap) +
                    ap * (std::log(bq) - std::log(bp)) + aq * (bp - bq) / bq;
  return std::max(0.0, kl);
}

double dirichlet_kl(const DirichletWeights& q, const DirichletWeights& p) {
  if (q.size() != p.size()) throw ValidationError("dirichlet_kl: dimension mismatch");
  const auto cq = q.concentration();
  const auto cp = p.concentration();
  const double tq = q.total();
  const double psi_tq = digamma(tq);
  double kl = ln_gamma(tq) - ln_gamma(p.total());
  for (std::size_t i = 0; i < cq.size(); ++i) {
    kl += ln_gamma(cp[i]) - ln_gamma(cq[i]) + (cq[i] - cp[i]) * (digamma(cq[i]) - psi_tq);
  }
  return std::max(0.0, kl);
}

}  // namespace evi
