#include "bpre/rng.hpp"

#include <cmath>
#include <limits>

#include "bpre/errors.hpp"

namespace bpre {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Stream keying: fold the stream id into the seed through two mix rounds so
// that nearby (seed, stream) pairs land far apart in state space.
inline std::uint64_t derive_state(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t h = mix64(seed + kGolden);
  h = mix64(h ^ (stream + 0x637c835a2c3b4d5eull));
  return mix64(h + kGolden);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), state_(derive_state(seed, stream)) {}

Rng Rng::split(std::uint64_t substream) const {
  // Children are keyed on the parent's stream id, not its current state, so
  // splitting is position-independent.
  return Rng(seed_, mix64(stream_ + kGolden) ^ (substream + 1));
}

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double Rng::uniform() {
  // 53 random bits in (0,1): (k + 0.5) / 2^53 with k in [0, 2^53).
  const std::uint64_t bits = next_u64() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

bool Rng::bernoulli(double p) { return uniform() < p; }

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  cached_normal_ = v * f;
  has_cached_normal_ = true;
  return u * f;
}

double Rng::exponential() { return -std::log(uniform()); }

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw InvalidParameter("gamma: shape must be positive");
  if (shape < 1.0) {
    // Boost from shape+1 (Marsaglia-Tsang trick).
    const double u = uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::uint64_t Rng::poisson_small(double mean) {
  // Knuth product method, fine for mean < ~12.
  const double limit = std::exp(-mean);
  double prod = 1.0;
  std::uint64_t k = 0;
  for (;;) {
    prod *= uniform();
    if (prod <= limit) return k;
    ++k;
  }
}

std::uint64_t Rng::poisson_ptrs(double mean) {
  // Transformed rejection with squeeze (Hormann 1993, PTRS).
  const double slam = std::sqrt(mean);
  const double llam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::abs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        kf * llam - mean - std::lgamma(kf + 1.0)) {
      return static_cast<std::uint64_t>(kf);
    }
  }
}

std::uint64_t Rng::poisson(double mean, bool* approx) {
  if (!(mean >= 0.0)) throw InvalidParameter("poisson: mean must be >= 0");
  if (mean == 0.0) return 0;
  if (mean <= kNormalApproxThreshold) {
    if (mean < 12.0) return poisson_small(mean);
    return poisson_ptrs(mean);
  }
  if (approx) *approx = true;
  const double draw = std::floor(mean + std::sqrt(mean) * normal() + 0.5);
  if (draw >= 9.007199254740992e15)  // 2^53
    throw OverflowError("poisson: draw beyond exact count range", mean);
  return draw <= 0.0 ? 0 : static_cast<std::uint64_t>(draw);
}

std::uint64_t Rng::binomial_inversion(std::uint64_t n, double p) {
  // Count successes via geometric waiting times; O(np) expected.
  const double log_q = std::log1p(-p);
  std::uint64_t k = 0;
  double sum = 0.0;
  for (;;) {
    sum += std::log(uniform()) / static_cast<double>(n - k);
    if (sum < log_q) return k;
    ++k;
    if (k == n) return n;
  }
}

std::uint64_t Rng::binomial_btrs(std::uint64_t n, double p) {
  // Transformed rejection (Hormann 1993, BTRS); requires np >= 10, p <= 1/2.
  const double nd = static_cast<double>(n);
  const double q = 1.0 - p;
  const double spq = std::sqrt(nd * p * q);
  const double b = 1.15 + 2.53 * spq;
  const double a = -0.0873 + 0.0248 * b + 0.01 * p;
  const double c = nd * p + 0.5;
  const double vr = 0.92 - 4.2 / b;
  const double urvr = 0.86 * vr;
  const double alpha = (2.83 + 5.1 / b) * spq;
  const double lpq = std::log(p / q);
  const double m = std::floor((nd + 1.0) * p);
  const double h = std::lgamma(m + 1.0) + std::lgamma(nd - m + 1.0);
  for (;;) {
    double v = uniform();
    double u;
    if (v <= urvr) {
      u = v / vr - 0.43;
      return static_cast<std::uint64_t>(
          std::floor((2.0 * a / (0.5 - std::abs(u)) + b) * u + c));
    }
    if (v >= vr) {
      u = uniform() - 0.5;
    } else {
      u = v / vr - 0.93;
      u = (u < 0.0 ? -0.5 : 0.5) - u;
      v = uniform() * vr;
    }
    const double us = 0.5 - std::abs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + c);
    if (kf < 0.0 || kf > nd) continue;
    v = std::log(v * alpha / (a / (us * us) + b));
    if (v <= h - std::lgamma(kf + 1.0) - std::lgamma(nd - kf + 1.0) +
                 (kf - m) * lpq) {
      return static_cast<std::uint64_t>(kf);
    }
  }
}

std::uint64_t Rng::binomial(std::uint64_t n, double p, bool* approx) {
  if (!(p >= 0.0 && p <= 1.0))
    throw InvalidParameter("binomial: p must lie in [0,1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  const bool flip = p > 0.5;
  const double ps = flip ? 1.0 - p : p;
  const double mean = static_cast<double>(n) * ps;
  std::uint64_t k;
  if (mean > kNormalApproxThreshold) {
    if (approx) *approx = true;
    const double sd = std::sqrt(mean * (1.0 - ps));
    double draw = std::floor(mean + sd * normal() + 0.5);
    if (draw < 0.0) draw = 0.0;
    if (draw > static_cast<double>(n)) draw = static_cast<double>(n);
    k = static_cast<std::uint64_t>(draw);
  } else if (mean < 10.0) {
    k = binomial_inversion(n, ps);
  } else {
    k = binomial_btrs(n, ps);
  }
  return flip ? n - k : k;
}

std::uint64_t Rng::negative_binomial(std::uint64_t r, double p, bool* approx) {
  if (!(p > 0.0 && p <= 1.0))
    throw InvalidParameter("negative_binomial: p must lie in (0,1]");
  if (r == 0 || p == 1.0) return 0;
  // Gamma-Poisson mixture: lambda ~ Gamma(r, q/p), then Poisson(lambda).
  const double scale = (1.0 - p) / p;
  const double lambda = gamma(static_cast<double>(r)) * scale;
  return poisson(lambda, approx);
}

}  // namespace bpre
