#ifndef EVI_DISTRIBUTIONS_HPP_
#define EVI_DISTRIBUTIONS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "evi/rng.hpp"

namespace evi {

// Gamma(shape a, rate b) factor, used for q(u_ik) and the prior p(u_ik).
class GammaPosterior {
 public:
  GammaPosterior(double shape, double rate);

  double shape() const { return shape_; }
  double rate() const { return rate_; }

  double mean() const { return shape_ / rate_; }
  // E[ln u] = psi(a) - ln b
  double mean_log() const;
  // Var[ln u] = psi'(a)
  double var_log() const;

  double log_pdf(double x) const;
  // Density of u evaluated at u = exp(log_x).
  double log_pdf_at_log(double log_x) const;

  friend bool operator==(const GammaPosterior&, const GammaPosterior&) = default;

 private:
  double shape_;
  double rate_;
};

// Dirichlet(c) over mixture weights.
class DirichletWeights {
 public:
  explicit DirichletWeights(std::vector<double> concentration);

  std::span<const double> concentration() const { return concentration_; }
  std::size_t size() const { return concentration_.size(); }
  double total() const;

  // E[ln pi_i] = psi(c_i) - psi(sum c)
  std::vector<double> expect_log() const;
  std::vector<double> mean() const;

  friend bool operator==(const DirichletWeights&, const DirichletWeights&) = default;

 private:
  std::vector<double> concentration_;
};

double beta_log_pdf(double x, double u, double v);
double dirichlet_log_pdf(std::span<const double> x, std::span<const double> u);
// Same density from log-coordinates; no simplex check. Used where points are
// sampled in log space to keep tiny coordinates representable.
double dirichlet_log_pdf_at_log(std::span<const double> log_x, std::span<const double> u);

double sample_gamma(double shape, double rate, RngStream& rng);
// ln of a Gamma(shape, rate) draw, computed without forming tiny values.
double sample_log_gamma(double shape, double rate, RngStream& rng);
double sample_beta(double u, double v, RngStream& rng);
std::vector<double> sample_dirichlet(std::span<const double> u, RngStream& rng);
std::vector<double> sample_log_dirichlet(std::span<const double> u, RngStream& rng);
std::size_t sample_categorical(std::span<const double> weights, RngStream& rng);

// KL(q || p), closed form, clamped at zero against rounding.
double gamma_kl(const GammaPosterior& q, const GammaPosterior& p);
double dirichlet_kl(const DirichletWeights& q, const DirichletWeights& p);

}  // namespace evi

#endif  // EVI_DISTRIBUTIONS_HPP_
