#ifndef EVI_MIXTURES_HPP_
#define EVI_MIXTURES_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evi/rng.hpp"

namespace evi {

// Mixture of Dirichlet densities (beta when K = 2): weights plus one row of
// shape parameters per component.
class MixtureSpec {
 public:
  MixtureSpec(std::vector<double> weights, std::vector<std::vector<double>> shapes);

  std::size_t components() const { return weights_.size(); }
  std::size_t dim() const { return shapes_.front().size(); }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> shape(std::size_t i) const { return shapes_.at(i); }
  const std::vector<std::vector<double>>& shapes() const { return shapes_; }

  friend bool operator==(const MixtureSpec&, const MixtureSpec&) = default;

 private:
  std::vector<double> weights_;
  std::vector<std::vector<double>> shapes_;
};

inline constexpr double kBoundaryEpsilon = 1e-10;

struct DatasetProvenance {
  MixtureSpec spec;
  std::uint64_t seed;
  std::uint64_t stream;
};

// N points on the open K-simplex stored row-major, with ln x cached because
// every update reads it. Coordinates are clamped to [eps, 1 - eps] and the row
// renormalized on construction.
class Dataset {
 public:
  Dataset(std::size_t dim, std::vector<double> points);

  std::size_t size() const { return n_; }
  std::size_t dim() const { return k_; }
  std::span<const double> point(std::size_t n) const { return {points_.data() + n * k_, k_}; }
  std::span<const double> log_point(std::size_t n) const {
    return {log_points_.data() + n * k_, k_};
  }
  std::span<const double> points() const { return points_; }

  // Component that generated each point; empty for loaded data. Diagnostics only.
  std::span<const std::size_t> latent() const { return latent_; }
  const std::optional<DatasetProvenance>& provenance() const { return provenance_; }

  void set_generation_info(std::vector<std::size_t> latent, DatasetProvenance provenance);

 private:
  std::size_t k_;
  std::size_t n_;
  std::vector<double> points_;
  std::vector<double> log_points_;
  std::vector<std::size_t> latent_;
  std::optional<DatasetProvenance> provenance_;
};

Dataset generate_dataset(const MixtureSpec& spec, std::size_t n, RngStream& rng);

double mixture_log_density(const MixtureSpec& spec, std::span<const double> x);

// Header "# K=<K> N=<N> seed=<seed>" then one tab-separated row per point.
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);

}  // namespace evi

#endif  // EVI_MIXTURES_HPP_
