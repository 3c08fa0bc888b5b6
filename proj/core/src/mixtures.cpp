#include "evi/mixtures.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "evi/distributions.hpp"
#include "evi/errors.hpp"
#include "text.hpp"

namespace evi {

MixtureSpec::MixtureSpec(std::vector<double> weights, std::vector<std::vector<double>> shapes)
    : weights_(std::move(weights)), shapes_(std::move(shapes)) {
  if (weights_.empty()) throw ValidationError("MixtureSpec: no components");
  if (shapes_.size() != weights_.size()) {
    throw ValidationError("MixtureSpec: " + std::to_string(weights_.size()) + " weights but " +
                          std::to_string(shapes_.size()) + " shape rows");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i])) {
      throw ValidationError("MixtureSpec: weights[" + std::to_string(i) + "] must be positive");
    }
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("MixtureSpec: weights must sum to 1, got " + text::format_double(total));
  }
  const std::size_t k = shapes_.front().size();
  if (k < 2) throw ValidationError("MixtureSpec: shape rows need at least 2 entries");
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    if (shapes_[i].size() != k) {
      throw ValidationError("MixtureSpec: shapes[" + std::to_string(i) + "] has length " +
                            std::to_string(shapes_[i].size()) + ", expected " + std::to_string(k));
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double s = shapes_[i][j];
      if (!(s > 0.0) || !std::isfinite(s)) {
        throw ValidationError("MixtureSpec: shapes[" + std::to_string(i) + "][" +
                              std::to_string(j) + "] must be positive");
      }
    }
  }
}

Dataset::Dataset(std::size_t dim, std::vector<double> points)
    : k_(dim), n_(0), points_(std::move(points)) {
  if (k_ < 2) throw ValidationError("Dataset: dimension must be >= 2");
  if (points_.empty() || points_.size() % k_ != 0) {
    throw ValidationError("Dataset: point buffer is empty or not a multiple of the dimension");
  }
  n_ = points_.size() / k_;
  log_points_.resize(points_.size());
  for (std::size_t n = 0; n < n_; ++n) {
    double* row = points_.data() + n * k_;
    double sum = 0.0;
    bool clamped = false;
    for (std::size_t j = 0; j < k_; ++j) {
      if (!std::isfinite(row[j]) || row[j] < 0.0) {
        throw ValidationError("Dataset: row " + std::to_string(n) +
                              " has a negative or non-finite coordinate");
      }
      const double c = std::clamp(row[j], kBoundaryEpsilon, 1.0 - kBoundaryEpsilon);
      clamped = clamped || c != row[j];
      row[j] = c;
      sum += row[j];
    }
    // Rows that already sum to one are left alone so a written dataset reads
    // back bit for bit.
    if (clamped || std::abs(sum - 1.0) > 1e-12) {
      for (std::size_t j = 0; j < k_; ++j) row[j] /= sum;
    }
    for (std::size_t j = 0; j < k_; ++j) log_points_[n * k_ + j] = std::log(row[j]);
  }
}

void Dataset::set_generation_info(std::vector<std::size_t> latent, DatasetProvenance provenance) {
  if (latent.size() != n_) throw ValidationError("Dataset: latent labels do not match size");
  latent_ = std::move(latent);
  provenance_ = std::move(provenance);
}

Dataset generate_dataset(const MixtureSpec& spec, std::size_t n, RngStream& rng) {
  if (n == 0) throw ValidationError("generate_dataset: n must be >= 1");
  const std::size_t k = spec.dim();
  std::vector<double> points;
  points.reserve(n * k);
  std::vector<std::size_t> latent(n);
  for (std::size_t t = 0; t < n; ++t) {
    latent[t] = sample_categorical(spec.weights(), rng);
    const auto x = sample_dirichlet(spec.shape(latent[t]), rng);
    points.insert(points.end(), x.begin(), x.end());
  }
  Dataset data(k, std::move(points));
  data.set_generation_info(std::move(latent), {spec, rng.seed(), rng.stream()});
  return data;
}

double mixture_log_density(const MixtureSpec& spec, std::span<const double> x) {
  if (x.size() != spec.dim()) throw ValidationError("mixture_log_density: dimension mismatch");
  std::vector<double> terms(spec.components());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    terms[i] = std::log(spec.weights()[i]) + dirichlet_log_pdf(x, spec.shape(i));
  }
  const double top = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);
  return top + std::log(acc);
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << "# K=" << data.dim() << " N=" << data.size() << " seed=";
  if (data.provenance()) {
    out << data.provenance()->seed;
  } else {
    out << "none";
  }
  out << '\n';
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto row = data.point(n);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << '\t';
      out << text::format_double(row[j]);
    }
    out << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw ValidationError("read_dataset: missing '# K=.. N=.. seed=..' header");
  }
  std::size_t k = 0;
  std::size_t n = 0;
  {
    std::istringstream hs(line.substr(2));
    std::string field;
    while (hs >> field) {
      if (field.rfind("K=", 0) == 0) k = std::stoul(field.substr(2));
      if (field.rfind("N=", 0) == 0) n = std::stoul(field.substr(2));
    }
  }
  if (k < 2 || n == 0) throw ValidationError("read_dataset: header needs K >= 2 and N >= 1");
  std::vector<double> points;
  points.reserve(n * k);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    std::size_t start = 0;
    std::size_t cols = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      const std::string_view cell(line.data() + start,
                                  (tab == std::string::npos ? line.size() : tab) - start);
      double v = 0.0;
      if (!text::parse_double(cell, v)) {
        throw ValidationError("read_dataset: line " + std::to_string(rows + 1) +
                              ": bad number '" + std::string(cell) + "'");
      }
      points.push_back(v);
      ++cols;
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols != k) {
      throw ValidationError("read_dataset: line " + std::to_string(rows + 1) + " has " +
                            std::to_string(cols) + " columns, expected " + std::to_string(k));
    }
  }
  if (rows != n) {
    throw ValidationError("read_dataset: header says N=" + std::to_string(n) + " but found " +
                          std::to_string(rows) + " rows");
  }
  return Dataset(k, std::move(points));
}

}  // namespace evi
