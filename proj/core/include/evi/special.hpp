#ifndef EVI_SPECIAL_HPP_
#define EVI_SPECIAL_HPP_

namespace evi {

// ln Gamma(x) for x > 0. Lanczos (g = 7) for x >= 0.5, shifted below that.
// Throws DomainError for x <= 0 or non-finite x.
double ln_gamma(double x);

// psi(x) = d/dx ln Gamma(x), x > 0.
double digamma(double x);

// psi'(x), x > 0.
double trigamma(double x);

// ln Gamma(sum u) - sum ln Gamma(u_k) evaluated from raw pointers; shared by
// the bound evaluators and the Monte Carlo loops. No validation.
double log_inverse_beta_unchecked(const double* u, int k);

}  // namespace evi

#endif  // EVI_SPECIAL_HPP_
