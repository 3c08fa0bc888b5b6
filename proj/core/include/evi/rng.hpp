#ifndef EVI_RNG_HPP_
#define EVI_RNG_HPP_

#include <array>
#include <cstdint>
#include <limits>

namespace evi {

// Reproducible pseudo-random stream keyed by (seed, stream id).
//
// The engine is xoshiro256** whose state is derived from the pair through
// SplitMix64, so every (seed, stream) pair names an independent sequence and
// experiment rounds can be given stream ids without coordinating. All derived
// variates (uniform, normal) are computed here rather than through <random>
// distributions, which differ between standard library implementations.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1); safe to take the log of.
  double uniform_open();
  // Standard normal (Marsaglia polar method).
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::array<std::uint64_t, 4> state_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace evi

#endif  // EVI_RNG_HPP_
