#include <cmath>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>
#include <vector>

#include "evi/bounds.hpp"
#include "evi/errors.hpp"

namespace evi {
namespace {

using boost::math::digamma;
using boost::math::trigamma;

double log_uniform(RngStream& rng, double lo, double hi) {
  return std::exp(std::log(lo) + rng.uniform() * (std::log(hi) - std::log(lo)));
}

std::vector<GammaPosterior> random_beta_posterior(RngStream& rng) {
  return {GammaPosterior(log_uniform(rng, 0.1, 100), log_uniform(rng, 0.1, 100)),
          GammaPosterior(log_uniform(rng, 0.1, 100), log_uniform(rng, 0.1, 100))};
}

TEST(ExactLib, HandValues) {
  EXPECT_NEAR(exact_lib(std::vector<double>{1, 1}), 0.0, 1e-14);
  EXPECT_NEAR(exact_lib(std::vector<double>{2, 2}), std::log(6.0), 1e-14);
  EXPECT_THROW(exact_lib(std::vector<double>{1, 0}), DomainError);
}

TEST(ExactLib, ArbitraryPrecisionOracle) {
  using Big = boost::multiprecision::cpp_bin_float_50;
  const Big want = boost::math::lgamma(Big(19)) - boost::math::lgamma(Big(4)) -
                   boost::math::lgamma(Big(12)) - boost::math::lgamma(Big(3));
  EXPECT_NEAR(exact_lib(std::vector<double>{4, 12, 3}), want.convert_to<double>(), 1e-12);
}

TEST(ExactLib, FromLogHandlesUnderflow) {
  const std::vector<double> l = {std::log(3.0), std::log(0.25)};
  EXPECT_NEAR(exact_lib_from_log(l), exact_lib(std::vector<double>{3.0, 0.25}), 1e-13);
  // u_2 = e^-800 underflows; ln Gamma(u_2) ~ 800 and the ln Gamma(3) terms cancel.
  const std::vector<double> tiny = {std::log(3.0), -800.0};
  EXPECT_NEAR(exact_lib_from_log(tiny), -800.0, 1e-9);
}

TEST(SlbBound, ExpansionPointGivesExactLib) {
  const std::vector<double> u = {4, 12, 3};
  const auto ce = ComponentExpectations::point_mass(u);
  EXPECT_NEAR(slb_bound(ce), exact_lib(u), 1e-13);
  const auto ce2 = ComponentExpectations::point_mass(std::vector<double>{2.5, 7.0});
  EXPECT_NEAR(mlb_u_bound(ce2, 0), exact_lib(ce2.mean), 1e-13);
  EXPECT_NEAR(mlb_v_bound(ce2), exact_lib(ce2.mean), 1e-13);
  EXPECT_NEAR(mlb_z_bound(ce2), exact_lib(ce2.mean), 1e-13);
}

TEST(SlbBound, DirectFormula) {
  const std::vector<GammaPosterior> q = {GammaPosterior(4, 2), GammaPosterior(16, 2)};
  const auto ce = ComponentExpectations::from_posteriors(q);
  const double u = 2, v = 8, s = 10;
  const double want = boost::math::lgamma(s) - boost::math::lgamma(u) - boost::math::lgamma(v) +
                      u * (digamma(s) - digamma(u)) * (digamma(4.0) - std::log(2.0) - std::log(u)) +
                      v * (digamma(s) - digamma(v)) * (digamma(16.0) - std::log(2.0) - std::log(v));
  EXPECT_NEAR(slb_bound(ce), want, 1e-12);
}

TEST(SlbBound, BelowMonteCarloExpectation) {
  const std::vector<GammaPosterior> q = {GammaPosterior(4, 2), GammaPosterior(16, 2)};
  const double bound = slb_bound(ComponentExpectations::from_posteriors(q));
  RngStream rng(100);
  const int n = 1000000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = sample_gamma(4, 2, rng);
    const double b = sample_gamma(16, 2, rng);
    const double lib = boost::math::lgamma(a + b) - boost::math::lgamma(a) - boost::math::lgamma(b);
    s += lib;
    ss += lib * lib;
  }
  const double mean = s / n;
  const double se = std::sqrt((ss / n - mean * mean) / n);
  EXPECT_LE(bound, mean + 3 * se);
}

TEST(SlbBound, PointMassLimit) {
  const double u = 3.0, v = 5.5;
  const double shape = 1e12;
  const std::vector<GammaPosterior> q = {GammaPosterior(shape, shape / u),
                                         GammaPosterior(shape, shape / v)};
  EXPECT_NEAR(slb_bound(ComponentExpectations::from_posteriors(q)),
              exact_lib(std::vector<double>{u, v}), 1e-6);
}

TEST(SlbBound, SymmetricUnderSwap) {
  RngStream rng(3);
  for (int i = 0; i < 200; ++i) {
    auto q = random_beta_posterior(rng);
    const double a = slb_bound(ComponentExpectations::from_posteriors(q));
    std::swap(q[0], q[1]);
    const double b = slb_bound(ComponentExpectations::from_posteriors(q));
    EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(a)));
  }
}

// q(u) a point mass at 2, q(v) = Gamma(4, 2) so vbar = 2.
ComponentExpectations worked_example() {
  ComponentExpectations ce;
  ce.mean = {2.0, 2.0};
  ce.mean_log = {std::log(2.0), digamma(4.0) - std::log(2.0)};
  ce.var_log = {0.0, trigamma(4.0)};
  return ce;
}

TEST(MlbUBound, WorkedExample) {
  const auto ce = worked_example();
  const double want = -4.0 * trigamma(4.0) * (digamma(4.0) - 2 * std::log(2.0));
  EXPECT_NEAR(want, 0.1478, 1e-4);
  EXPECT_NEAR(slb_bound(ce) - mlb_u_bound(ce, 0), want, 1e-12);
  EXPECT_NEAR(slb_minus_mlb_u(ce), want, 1e-12);
  EXPECT_NEAR(slb_minus_mlb_u(ce), 0.1478, 1e-4);
}

TEST(MlbUBound, ZeroWhenOtherDimensionHasNoSpread) {
  auto ce = worked_example();
  ce.mean_log[1] = std::log(ce.mean[1]);
  ce.var_log[1] = 0.0;
  EXPECT_DOUBLE_EQ(slb_minus_mlb_u(ce), 0.0);
}

TEST(MlbBounds, BelowSlbOnRandomConfigurations) {
  RngStream rng(4);
  for (int i = 0; i < 10000; ++i) {
    const auto ce = ComponentExpectations::from_posteriors(random_beta_posterior(rng));
    const double slb = slb_bound(ce);
    const double eps = 1e-12 * std::max(1.0, std::abs(slb));
    EXPECT_LE(mlb_u_bound(ce, 0), slb + eps);
    EXPECT_LE(mlb_u_bound(ce, 1), slb + eps);
    EXPECT_LE(mlb_z_bound(ce), slb + eps);
    EXPECT_GE(slb_minus_mlb_u(ce), -1e-12);
    EXPECT_GE(slb_minus_mlb_z(ce), -1e-12);
  }
}

TEST(MlbZBound, HandAssembledEqualPosteriors) {
  const double a = 3.0, b = 0.75;
  const std::vector<GammaPosterior> q = {GammaPosterior(a, b), GammaPosterior(a, b)};
  const auto ce = ComponentExpectations::from_posteriors(q);
  const double m = a / b;
  const double d = digamma(a) - std::log(b) - std::log(m);
  const double second = trigamma(a) + d * d;
  const double t = trigamma(2 * m);
  const double slb = boost::math::lgamma(2 * m) - 2 * boost::math::lgamma(m) +
                     2 * m * (digamma(2 * m) - digamma(m)) * d;
  const double want = slb + m * m * (t - trigamma(m)) * second + m * m * t * d * d;
  EXPECT_NEAR(mlb_z_bound(ce), want, 1e-12);
}

TEST(MlbBounds, BetaOnly) {
  const auto ce = ComponentExpectations::point_mass(std::vector<double>{1, 2, 3});
  EXPECT_THROW(mlb_u_bound(ce, 0), UnsupportedDimension);
  EXPECT_THROW(mlb_z_bound(ce), UnsupportedDimension);
  EXPECT_THROW(slb_minus_mlb_u(ce), UnsupportedDimension);
  EXPECT_THROW(slb_minus_mlb_z(ce), UnsupportedDimension);
  EXPECT_THROW(shape_coefficient(ce, 0, BoundKind::kMlbStrong), UnsupportedDimension);
  EXPECT_NO_THROW(shape_coefficient(ce, 0, BoundKind::kSlbWeak));
}

TEST(ShapeCoefficient, Formulas) {
  const std::vector<GammaPosterior> q = {GammaPosterior(5, 2), GammaPosterior(3, 0.5)};
  const auto ce = ComponentExpectations::from_posteriors(q);
  const double u = 2.5, v = 6.0, s = 8.5;
  const double slb_u = u * (digamma(s) - digamma(u));
  EXPECT_NEAR(shape_coefficient(ce, 0, BoundKind::kSlbWeak), slb_u, 1e-13);
  const double dv = digamma(3.0) - std::log(0.5) - std::log(v);
  EXPECT_NEAR(shape_coefficient(ce, 0, BoundKind::kMlbStrong), slb_u + u * v * trigamma(s) * dv,
              1e-13);
  EXPECT_GT(shape_coefficient(ce, 1, BoundKind::kSlbWeak), 0.0);
}

TEST(ComponentExpectations, SecondMomentIdentity) {
  const std::vector<GammaPosterior> q = {GammaPosterior(2.5, 1.0), GammaPosterior(0.4, 3.0)};
  const auto ce = ComponentExpectations::from_posteriors(q);
  // E[(ln u - ln ubar)^2] by Monte Carlo against the closed form.
  RngStream rng(8);
  for (std::size_t k = 0; k < 2; ++k) {
    double s = 0.0, ss = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
      const double l = sample_log_gamma(q[k].shape(), q[k].rate(), rng) - std::log(ce.mean[k]);
      s += l * l;
      ss += l * l * l * l;
    }
    const double mean = s / n;
    const double se = std::sqrt((ss / n - mean * mean) / n);
    EXPECT_NEAR(ce.second_moment_log(k), mean, 4 * se);
    EXPECT_LE(ce.mean_log[k], std::log(ce.mean[k]));
  }
}

TEST(MeasureGap, DegeneratePosterior) {
  const double shape = 1e14;
  const std::vector<GammaPosterior> q = {GammaPosterior(shape, shape / 3.0),
                                         GammaPosterior(shape, shape / 7.0)};
  RngStream rng(1);
  const GapEstimate g = measure_gap(q, GapBound::kSlb, rng, 2000);
  EXPECT_NEAR(g.mean, 0.0, 1e-6);
  RngStream rng2(1);
  EXPECT_NEAR(measure_gap(q, GapBound::kMlbZ, rng2, 2000).mean, 0.0, 1e-6);
}

TEST(MeasureGap, WeakAndStrongOrdering) {
  RngStream params(5);
  for (int i = 0; i < 20; ++i) {
    const double mu = log_uniform(params, 1, 50), mv = log_uniform(params, 1, 50);
    const double au = log_uniform(params, 0.5, 50), av = log_uniform(params, 0.5, 50);
    const std::vector<GammaPosterior> q = {GammaPosterior(au, au / mu), GammaPosterior(av, av / mv)};
    RngStream r1(6, i), r2(7, i), r3(8, i);
    const auto slb = measure_gap(q, GapBound::kSlb, r1, 5000);
    const auto mlbz = measure_gap(q, GapBound::kMlbZ, r2, 5000);
    const auto mlbu = measure_gap(q, GapBound::kMlbU, r3, 5000);
    EXPECT_GE(slb.mean, -3 * slb.std_error);
    EXPECT_GE(mlbz.mean, slb.mean - 3 * std::hypot(slb.std_error, mlbz.std_error));
    EXPECT_GE(mlbu.mean, slb.mean - 3 * std::hypot(slb.std_error, mlbu.std_error));
  }
}

TEST(MeasureGap, RequiresEnoughDraws) {
  const std::vector<GammaPosterior> q = {GammaPosterior(2, 1), GammaPosterior(2, 1)};
  RngStream rng(1);
  EXPECT_THROW(measure_gap(q, GapBound::kSlb, rng, 999), ValidationError);
}

TEST(BoundKindNames, RoundTrip) {
  EXPECT_EQ(bound_kind_from_string(to_string(BoundKind::kSlbWeak)), BoundKind::kSlbWeak);
  EXPECT_EQ(bound_kind_from_string(to_string(BoundKind::kMlbStrong)), BoundKind::kMlbStrong);
  EXPECT_THROW(bound_kind_from_string("tight"), ValidationError);
}

}  // namespace
}  // namespace evi
