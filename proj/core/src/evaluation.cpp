#include "evi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include "json.hpp"
#include <ostream>

#include "evi/distributions.hpp"
#include "evi/errors.hpp"
#include "evi/parallel.hpp"
#include "text.hpp"

namespace evi {
namespace {

class RunningMean {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }
  McEstimate estimate() const {
    const double n = static_cast<double>(n_);
    return {mean_, n_ > 1 ? std::sqrt(m2_ / (n - 1.0) / n) : 0.0};
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

double log_sum_exp(const std::vector<double>& v) {
  const double top = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - top);
  return top + std::log(acc);
}

double mixture_log_density_at_log(const MixtureSpec& spec, const std::vector<double>& log_weights,
                                  std::span<const double> log_x, std::vector<double>& scratch) {
  for (std::size_t i = 0; i < spec.components(); ++i) {
    scratch[i] = log_weights[i] + dirichlet_log_pdf_at_log(log_x, spec.shape(i));
  }
  return log_sum_exp(scratch);
}

// Linear interpolation between order statistics.
double quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

McEstimate elbo_monte_carlo(const VariationalState& state, const Dataset& data,
                            const Priors& priors, RngStream& rng, std::size_t draws) {
  if (draws < 1000) throw ValidationError("elbo_monte_carlo: draws must be >= 1000");
  if (state.dim() != data.dim()) throw ValidationError("elbo_monte_carlo: dimension mismatch");
  const std::size_t comps = state.components();
  const std::size_t k = state.dim();
  const std::vector<double> c0(comps, priors.weight_concentration);
  const auto c = state.weight_posterior.concentration();
  const GammaPosterior prior = priors.shape_prior();

  std::vector<double> log_u(k);
  std::vector<double> u(comps * k);
  std::vector<double> offset(comps);
  std::vector<double> terms(comps);
  RunningMean acc;
  for (std::size_t d = 0; d < draws; ++d) {
    const auto log_pi = sample_log_dirichlet(c, rng);
    double log_ratio = dirichlet_log_pdf_at_log(log_pi, c0) - dirichlet_log_pdf_at_log(log_pi, c);
    for (std::size_t i = 0; i < comps; ++i) {
      const auto& row = state.shape_posteriors[i];
      for (std::size_t j = 0; j < k; ++j) {
        log_u[j] = sample_log_gamma(row[j].shape(), row[j].rate(), rng);
        u[i * k + j] = std::exp(log_u[j]);
        log_ratio += prior.log_pdf_at_log(log_u[j]) - row[j].log_pdf_at_log(log_u[j]);
      }
      offset[i] = log_pi[i] + exact_lib_from_log(log_u);
    }
    double loglik = 0.0;
    for (std::size_t n = 0; n < data.size(); ++n) {
      const auto lx = data.log_point(n);
      for (std::size_t i = 0; i < comps; ++i) {
        double v = offset[i];
        for (std::size_t j = 0; j < k; ++j) v += (u[i * k + j] - 1.0) * lx[j];
        terms[i] = v;
      }
      loglik += log_sum_exp(terms);
    }
    acc.add(loglik + log_ratio);
  }
  return acc.estimate();
}

MixtureSpec point_estimate(const VariationalState& state) {
  auto weights = state.weight_posterior.mean();
  std::vector<std::vector<double>> shapes;
  shapes.reserve(state.components());
  for (const auto& row : state.shape_posteriors) {
    std::vector<double> means;
    for (const auto& q : row) means.push_back(q.mean());
    shapes.push_back(std::move(means));
  }
  return MixtureSpec(std::move(weights), std::move(shapes));
}

McEstimate kl_true_vs_estimated(const MixtureSpec& truth, const MixtureSpec& estimate,
                                RngStream& rng, std::size_t draws) {
  if (draws < 1000) throw ValidationError("kl_true_vs_estimated: draws must be >= 1000");
  if (truth.dim() != estimate.dim()) {
    throw ValidationError("kl_true_vs_estimated: truth has K = " + std::to_string(truth.dim()) +
                          ", estimate has K = " + std::to_string(estimate.dim()));
  }
  std::vector<double> lw_truth;
  std::vector<double> lw_est;
  for (double w : truth.weights()) lw_truth.push_back(std::log(w));
  for (double w : estimate.weights()) lw_est.push_back(std::log(w));
  std::vector<double> scratch_truth(truth.components());
  std::vector<double> scratch_est(estimate.components());
  RunningMean acc;
  for (std::size_t d = 0; d < draws; ++d) {
    const std::size_t comp = sample_categorical(truth.weights(), rng);
    const auto log_x = sample_log_dirichlet(truth.shape(comp), rng);
    acc.add(mixture_log_density_at_log(truth, lw_truth, log_x, scratch_truth) -
            mixture_log_density_at_log(estimate, lw_est, log_x, scratch_est));
  }
  return acc.estimate();
}

SummaryStats summarize(std::vector<double> values) {
  SummaryStats s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  std::sort(values.begin(), values.end());
  s.q25 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q75 = quantile(values, 0.75);
  return s;
}

ComparisonReport compare_methods(const MixtureSpec& truth, std::size_t n, std::size_t rounds,
                                 const Priors& priors, std::uint64_t seed,
                                 const ComparisonOptions& options) {
  if (rounds == 0) throw ValidationError("compare_methods: rounds must be >= 1");
  if (n == 0) throw ValidationError("compare_methods: n must be >= 1");
  priors.validate();
  const std::size_t comps = options.components ? options.components : truth.components();

  ComparisonReport report{truth, n, seed, std::vector<RoundResult>(rounds), 0, 0, {}, {}};
  parallel_for(rounds, options.threads, [&](std::size_t r) {
    RoundResult& out = report.rounds[r];
    out.round = r;
    try {
      RngStream data_rng(seed, 4 * r);
      const Dataset data = generate_dataset(truth, n, data_rng);
      RngStream init_rng(seed, 4 * r + 1);
      VariationalState init = init_state(data, comps, priors, BoundKind::kSlbWeak, init_rng);
      VariationalState init_mlb = init;
      init_mlb.bound_kind = BoundKind::kMlbStrong;

      const EviResult slb = run_evi(std::move(init), data, priors, options.evi);
      const EviResult mlb = run_evi(std::move(init_mlb), data, priors, options.evi);
      out.iters_slb = static_cast<int>(slb.trace.size());
      out.iters_mlb = static_cast<int>(mlb.trace.size());
      out.mlb_decreases = detect_relative_decreases(mlb.trace, options.nonmonotone_rel_tol).size();
      out.excluded = out.mlb_decreases > 0;

      RngStream elbo_a(seed, 4 * r + 2);
      RngStream elbo_b(seed, 4 * r + 2);
      const McEstimate l_slb = elbo_monte_carlo(slb.state, data, priors, elbo_a, options.elbo_draws);
      const McEstimate l_mlb = elbo_monte_carlo(mlb.state, data, priors, elbo_b, options.elbo_draws);
      RngStream kl_a(seed, 4 * r + 3);
      RngStream kl_b(seed, 4 * r + 3);
      const McEstimate kl_slb =
          kl_true_vs_estimated(truth, point_estimate(slb.state), kl_a, options.kl_draws);
      const McEstimate kl_mlb =
          kl_true_vs_estimated(truth, point_estimate(mlb.state), kl_b, options.kl_draws);
      out.l_slb = l_slb.value;
      out.l_slb_stderr = l_slb.std_error;
      out.l_mlb = l_mlb.value;
      out.l_mlb_stderr = l_mlb.std_error;
      out.kl_slb = kl_slb.value;
      out.kl_slb_stderr = kl_slb.std_error;
      out.kl_mlb = kl_mlb.value;
      out.kl_mlb_stderr = kl_mlb.std_error;
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
    }
  });

  std::vector<double> dl;
  std::vector<double> dkl;
  for (const auto& r : report.rounds) {
    if (r.failed) {
      ++report.failed_rounds;
      continue;
    }
    if (r.excluded) {
      ++report.excluded_rounds;
      continue;
    }
    dl.push_back(r.l_slb - r.l_mlb);
    dkl.push_back(r.kl_slb - r.kl_mlb);
  }
  report.delta_l = summarize(std::move(dl));
  report.delta_kl = summarize(std::move(dkl));
  return report;
}

namespace {

nlohmann::ordered_json stats_json(const SummaryStats& s) {
  return {{"count", s.count}, {"mean", s.mean},     {"stddev", s.stddev},
          {"q25", s.q25},     {"median", s.median}, {"q75", s.q75}};
}

}  // namespace

void write_report_json(std::ostream& out, const ComparisonReport& report) {
  nlohmann::ordered_json j;
  j["n"] = report.n;
  j["seed"] = report.seed;
  j["truth"] = {{"weights", std::vector<double>(report.truth.weights().begin(),
                                                report.truth.weights().end())},
                {"shapes", report.truth.shapes()}};
  j["rounds"] = report.rounds.size();
  j["excluded_rounds"] = report.excluded_rounds;
  j["failed_rounds"] = report.failed_rounds;
  j["delta_l"] = stats_json(report.delta_l);
  j["delta_kl"] = stats_json(report.delta_kl);
  auto& per = j["per_round"];
  per = nlohmann::ordered_json::object();
  auto column = [&](const char* name, auto get) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : report.rounds) arr.push_back(get(r));
    per[name] = std::move(arr);
  };
  column("l_slb", [](const RoundResult& r) { return r.l_slb; });
  column("l_mlb", [](const RoundResult& r) { return r.l_mlb; });
  column("l_slb_stderr", [](const RoundResult& r) { return r.l_slb_stderr; });
  column("l_mlb_stderr", [](const RoundResult& r) { return r.l_mlb_stderr; });
  column("kl_slb", [](const RoundResult& r) { return r.kl_slb; });
  column("kl_mlb", [](const RoundResult& r) { return r.kl_mlb; });
  column("kl_slb_stderr", [](const RoundResult& r) { return r.kl_slb_stderr; });
  column("kl_mlb_stderr", [](const RoundResult& r) { return r.kl_mlb_stderr; });
  column("iters_slb", [](const RoundResult& r) { return r.iters_slb; });
  column("iters_mlb", [](const RoundResult& r) { return r.iters_mlb; });
  column("mlb_decreases", [](const RoundResult& r) { return r.mlb_decreases; });
  column("excluded", [](const RoundResult& r) { return r.excluded; });
  column("failed", [](const RoundResult& r) { return r.failed; });
  column("error", [](const RoundResult& r) { return r.error; });
  out << j.dump(2) << '\n';
}

void write_report_csv(std::ostream& out, const ComparisonReport& report) {
  using text::format_double;
  out << "round,l_slb,l_mlb,kl_slb,kl_mlb,l_slb_stderr,l_mlb_stderr,kl_slb_stderr,"
         "kl_mlb_stderr,iters_slb,iters_mlb,mlb_decreases,excluded,failed\n";
  for (const auto& r : report.rounds) {
    out << r.round << ',' << format_double(r.l_slb) << ',' << format_double(r.l_mlb) << ','
        << format_double(r.kl_slb) << ',' << format_double(r.kl_mlb) << ','
        << format_double(r.l_slb_stderr) << ',' << format_double(r.l_mlb_stderr) << ','
        << format_double(r.kl_slb_stderr) << ',' << format_double(r.kl_mlb_stderr) << ','
        << r.iters_slb << ',' << r.iters_mlb << ',' << r.mlb_decreases << ','
        << (r.excluded ? 1 : 0) << ',' << (r.failed ? 1 : 0) << '\n';
  }
}

void write_quartiles_csv(std::ostream& out, const ComparisonReport& report) {
  using text::format_double;
  std::vector<double> l_slb, l_mlb, kl_slb, kl_mlb;
  for (const auto& r : report.rounds) {
    if (r.failed || r.excluded) continue;
    l_slb.push_back(r.l_slb);
    l_mlb.push_back(r.l_mlb);
    kl_slb.push_back(r.kl_slb);
    kl_mlb.push_back(r.kl_mlb);
  }
  out << "series,count,q25,median,q75,mean\n";
  auto row = [&](const char* name, const SummaryStats& s) {
    out << name << ',' << s.count << ',' << format_double(s.q25) << ','
        << format_double(s.median) << ',' << format_double(s.q75) << ','
        << format_double(s.mean) << '\n';
  };
  row("l_slb", summarize(l_slb));
  row("l_mlb", summarize(l_mlb));
  row("kl_slb", summarize(kl_slb));
  row("kl_mlb", summarize(kl_mlb));
  row("delta_l", report.delta_l);
  row("delta_kl", report.delta_kl);
}

}  // namespace evi
