#pragma once

#include <cstdint>

namespace bpre {

// Splittable pseudo-random generator for reproducible parallel Monte Carlo.
//
// A generator is identified by (seed, stream). Child streams derived with
// split() are keyed on the parent's identity plus a substream index, so a
// computation partitioned over a fixed set of streams produces the same
// numbers no matter how the streams are scheduled. The core sequence is
// splitmix64; distribution samplers are implemented here rather than taken
// from <random> so that draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  // Independent child generator. Children of distinct substreams, and the
  // parent itself, never share state.
  Rng split(std::uint64_t substream) const;

  std::uint64_t seed_id() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  std::uint64_t next_u64();

  // Uniform on (0,1); never returns 0 or 1.
  double uniform();
  // Uniform on (lo,hi).
  double uniform(double lo, double hi);
  bool bernoulli(double p);

  // Standard normal (Marsaglia polar, second value cached).
  double normal();
  // Exponential with mean 1.
  double exponential();
  // Gamma(shape), unit scale. Marsaglia-Tsang, with the U^{1/a} boost for
  // shape < 1.
  double gamma(double shape);

  // Counting distributions. Exact samplers are used while the relevant
  // parameter stays at or below kNormalApproxThreshold; above it the draw
  // switches to a rounded normal approximation and *approx is set.
  static constexpr double kNormalApproxThreshold = 1e7;

  std::uint64_t poisson(double mean, bool* approx = nullptr);
  std::uint64_t binomial(std::uint64_t n, double p, bool* approx = nullptr);
  // Number of failures before the r-th success, success probability p.
  std::uint64_t negative_binomial(std::uint64_t r, double p,
                                  bool* approx = nullptr);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;

  std::uint64_t poisson_small(double mean);
  std::uint64_t poisson_ptrs(double mean);
  std::uint64_t binomial_inversion(std::uint64_t n, double p);
  std::uint64_t binomial_btrs(std::uint64_t n, double p);
};

}  // namespace bpre
