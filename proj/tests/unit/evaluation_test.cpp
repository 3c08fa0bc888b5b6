#include <cmath>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>
#include <sstream>

#include "evi/errors.hpp"
#include "evi/evaluation.hpp"
#include "json.hpp"

namespace evi {
namespace {

MixtureSpec model_a() { return MixtureSpec({0.3, 0.7}, {{2, 8}, {15, 4}}); }

Dataset make_data(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  return generate_dataset(spec, n, rng);
}

EviResult converged_slb(const Dataset& d, std::uint64_t seed) {
  RngStream rng(seed, 1);
  return run_evi(d, 2, Priors{}, BoundKind::kSlbWeak, rng, EviOptions{});
}

TEST(ElboMonteCarlo, IgnoresBoundKindTag) {
  const Dataset d = make_data(model_a(), 200, 1);
  const auto res = converged_slb(d, 1);
  VariationalState other = res.state;
  other.bound_kind = BoundKind::kMlbStrong;
  RngStream a(5), b(5);
  const auto ea = elbo_monte_carlo(res.state, d, Priors{}, a, 1000);
  const auto eb = elbo_monte_carlo(other, d, Priors{}, b, 1000);
  EXPECT_EQ(ea.value, eb.value);
  EXPECT_EQ(ea.std_error, eb.std_error);
}

TEST(ElboMonteCarlo, StandardErrorShrinksAsRootDraws) {
  const Dataset d = make_data(model_a(), 200, 2);
  const auto res = converged_slb(d, 2);
  RngStream a(6), b(7);
  const auto small = elbo_monte_carlo(res.state, d, Priors{}, a, 1000);
  const auto large = elbo_monte_carlo(res.state, d, Priors{}, b, 4000);
  EXPECT_NEAR(small.std_error / large.std_error, 2.0, 0.4);
}

TEST(ElboMonteCarlo, AtLeastSurrogateWhenConverged) {
  const Dataset d = make_data(model_a(), 400, 3);
  const auto res = converged_slb(d, 3);
  RngStream rng(8);
  const auto e = elbo_monte_carlo(res.state, d, Priors{}, rng, 4000);
  EXPECT_GE(e.value, res.trace.back().surrogate - 3 * e.std_error);
}

TEST(ElboMonteCarlo, NearPointMassMatchesDirectEvaluation) {
  const Dataset d = make_data(MixtureSpec({1.0}, {{3, 5}}), 100, 4);
  const Priors p;
  const double shape = 1e8;
  const double ubar[2] = {3.2, 4.7};
  VariationalState s{Matrix(d.size(), 1, 1.0),
                     {{GammaPosterior(shape, shape / ubar[0]), GammaPosterior(shape, shape / ubar[1])}},
                     DirichletWeights({100.001}), BoundKind::kSlbWeak};
  RngStream rng(9);
  const auto e = elbo_monte_carlo(s, d, p, rng, 4000);

  double direct = 0.0;
  const double lib = boost::math::lgamma(ubar[0] + ubar[1]) - boost::math::lgamma(ubar[0]) -
                     boost::math::lgamma(ubar[1]);
  for (std::size_t n = 0; n < d.size(); ++n) {
    direct += lib + (ubar[0] - 1) * d.log_point(n)[0] + (ubar[1] - 1) * d.log_point(n)[1];
  }
  for (int k = 0; k < 2; ++k) {
    const double b = shape / ubar[k];
    const double prior_log = p.gamma_shape * std::log(p.gamma_rate) -
                             boost::math::lgamma(p.gamma_shape) +
                             (p.gamma_shape - 1) * std::log(ubar[k]) - p.gamma_rate * ubar[k];
    const double entropy = shape - std::log(b) + boost::math::lgamma(shape) +
                           (1 - shape) * boost::math::digamma(shape);
    direct += prior_log + entropy;
  }
  EXPECT_NEAR(e.value, direct, 3 * e.std_error + 1e-4);
}

TEST(ElboMonteCarlo, RequiresDraws) {
  const Dataset d = make_data(model_a(), 50, 1);
  const auto res = converged_slb(d, 1);
  RngStream rng(1);
  EXPECT_THROW(elbo_monte_carlo(res.state, d, Priors{}, rng, 10), ValidationError);
}

TEST(PointEstimate, PriorValuedState) {
  const Priors p;
  const Dataset d = make_data(model_a(), 10, 1);
  VariationalState s{Matrix(10, 2, 0.5),
                     std::vector<std::vector<GammaPosterior>>(2, {p.shape_prior(), p.shape_prior()}),
                     p.weight_prior(2), BoundKind::kSlbWeak};
  const MixtureSpec est = point_estimate(s);
  EXPECT_DOUBLE_EQ(est.weights()[0], 0.5);
  EXPECT_DOUBLE_EQ(est.weights()[1], 0.5);
  for (std::size_t i = 0; i < 2; ++i) {
    for (double v : est.shape(i)) EXPECT_DOUBLE_EQ(v, p.gamma_shape / p.gamma_rate);
  }
}

TEST(PointEstimate, ModelARecoveryKl) {
  const Dataset d = make_data(model_a(), 2000, 12);
  const auto res = converged_slb(d, 12);
  RngStream rng(13);
  const auto kl = kl_true_vs_estimated(model_a(), point_estimate(res.state), rng, 100000);
  EXPECT_LT(kl.value, 0.05);
}

TEST(KlTrueVsEstimated, ZeroForIdenticalSpecs) {
  RngStream rng(1);
  const auto kl = kl_true_vs_estimated(model_a(), model_a(), rng, 100000);
  EXPECT_NEAR(kl.value, 0.0, 3 * kl.std_error + 1e-15);
  EXPECT_LT(kl.std_error, 1e-3);
}

TEST(KlTrueVsEstimated, PositiveForPerturbedShapes) {
  const MixtureSpec doubled({0.3, 0.7}, {{4, 16}, {30, 8}});
  RngStream rng(2);
  const auto kl = kl_true_vs_estimated(model_a(), doubled, rng, 10000);
  EXPECT_GT(kl.value, 3 * kl.std_error);
}

TEST(KlTrueVsEstimated, LabelFree) {
  const MixtureSpec est({0.25, 0.75}, {{2.5, 7}, {14, 4.5}});
  const MixtureSpec swapped({0.75, 0.25}, {{14, 4.5}, {2.5, 7}});
  RngStream a(3), b(3);
  EXPECT_NEAR(kl_true_vs_estimated(model_a(), est, a, 5000).value,
              kl_true_vs_estimated(model_a(), swapped, b, 5000).value, 1e-12);
}

TEST(KlTrueVsEstimated, NeverSignificantlyNegative) {
  RngStream params(4);
  for (int i = 0; i < 20; ++i) {
    const double w = 0.1 + 0.8 * params.uniform();
    const MixtureSpec est({w, 1 - w}, {{1 + 5 * params.uniform(), 1 + 10 * params.uniform()},
                                       {1 + 20 * params.uniform(), 1 + 5 * params.uniform()}});
    RngStream rng(5, i);
    const auto kl = kl_true_vs_estimated(model_a(), est, rng, 2000);
    EXPECT_GE(kl.value, -3 * kl.std_error);
  }
}

TEST(KlTrueVsEstimated, DimensionMismatch) {
  RngStream rng(1);
  EXPECT_THROW(kl_true_vs_estimated(model_a(), MixtureSpec({1.0}, {{1, 2, 3}}), rng, 1000),
               ValidationError);
}

TEST(Summarize, Quartiles) {
  const SummaryStats s = summarize({4, 1, 3, 2, 5});
  EXPECT_EQ(s.count, 5u);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_DOUBLE_EQ(s.median, 3.0);
  EXPECT_DOUBLE_EQ(s.q25, 2.0);
  EXPECT_DOUBLE_EQ(s.q75, 4.0);
  EXPECT_NEAR(s.stddev, std::sqrt(2.5), 1e-15);
}

TEST(CompareMethods, ReportShapeAndDeterminism) {
  ComparisonOptions opt;
  opt.elbo_draws = 1000;
  opt.kl_draws = 1000;
  opt.evi.max_iters = 60;
  opt.threads = 1;
  const auto r1 = compare_methods(model_a(), 300, 3, Priors{}, 17, opt);
  opt.threads = 3;
  const auto r3 = compare_methods(model_a(), 300, 3, Priors{}, 17, opt);
  ASSERT_EQ(r1.rounds.size(), 3u);
  EXPECT_EQ(r1.failed_rounds, 0u);
  EXPECT_EQ(r1.delta_l.count + r1.excluded_rounds, 3u);

  std::ostringstream j1, j3, csv;
  write_report_json(j1, r1);
  write_report_json(j3, r3);
  EXPECT_EQ(j1.str(), j3.str());

  const auto parsed = nlohmann::json::parse(j1.str());
  EXPECT_EQ(parsed["per_round"]["l_slb"].size(), 3u);
  EXPECT_EQ(parsed["rounds"], 3);

  write_report_csv(csv, r1);
  std::size_t lines = 0;
  for (char c : csv.str()) lines += c == '\n';
  EXPECT_EQ(lines, 4u);
}

TEST(CompareMethods, FailedRoundsAreRecorded) {
  ComparisonOptions opt;
  opt.elbo_draws = 1000;
  opt.kl_draws = 1000;
  opt.evi.max_iters = 5;
  // MLB bounds exist for K = 2 only, so every round fails on a K = 3 truth.
  const auto r = compare_methods(MixtureSpec({0.5, 0.5}, {{2, 3, 4}, {5, 1, 2}}), 50, 2, Priors{}, 1, opt);
  ASSERT_EQ(r.rounds.size(), 2u);
  EXPECT_EQ(r.failed_rounds, 2u);
  EXPECT_FALSE(r.rounds[0].error.empty());
}

}  // namespace
}  // namespace evi
