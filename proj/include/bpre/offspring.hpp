#pragma once

#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bpre/rng.hpp"

namespace bpre {

enum class Family : std::uint8_t {
  LinearFractionalGeometric,  // geometric on {0,1,...} with mean m
  Poisson,
  Binary,          // two children with probability p, none otherwise
  BoundedGeneric,  // arbitrary probability vector on {0..a*}
};

std::string family_name(Family f);
Family family_from_name(const std::string& name);

struct OffspringDraw {
  std::uint64_t total = 0;
  bool approximate = false;  // a normal-approximation sampler was used
};

// One reproduction law. All analytic functionals are closed forms per family;
// the survival-space forms (survival_map, survival_gap, g_survival) avoid
// subtracting near-equal quantities so they stay accurate when survival
// probabilities are tiny.
class OffspringLaw {
 public:
  static OffspringLaw linear_fractional(double mean);
  static OffspringLaw poisson(double mean);
  static OffspringLaw binary(double p);
  static OffspringLaw bounded(std::vector<double> probs);

  Family family() const { return family_; }
  // Mean number of children; the parameter itself for LF/Poisson.
  double mean() const;
  // Probability generating function f(s), s in [0,1].
  double pgf(double s) const;
  // 1 - f(1-r) for r in [0,1], computed without cancellation.
  double survival_map(double r) const;
  // mean()*r - survival_map(r) >= 0, again cancellation-safe; this is the
  // numerator of g in survival coordinates.
  double survival_gap(double r) const;
  // g(s) evaluated at s = 1-r; r = 0 returns the limit eta/2.
  double g_survival(double r) const;
  // Standardized second factorial moment  E[xi(xi-1)] / mean^2.
  double eta() const;
  // Standardized truncated second moment  sum_{y>=a} y^2 Q({y}) / mean^2.
  double zeta(std::uint64_t a) const;
  // Var(xi) = f''(1) + m - m^2.
  double offspring_variance() const;
  double prob_zero() const { return pgf(0.0); }
  double prob_one() const;

  // One draw of the total offspring of `parents` individuals, using the
  // closed-form aggregate law (Poisson sum, negative binomial, 2*binomial,
  // multinomial contraction). Cost is O(1) in `parents` for the parametric
  // families.
  OffspringDraw sample_total(std::uint64_t parents, Rng& rng) const;

  const std::vector<double>& probs() const { return probs_; }
  double param() const { return a_; }

 private:
  OffspringLaw(Family f, double a, std::vector<double> probs)
      : family_(f), a_(a), probs_(std::move(probs)) {}

  Family family_;
  double a_ = 0.0;             // mean for LF/Poisson, p for Binary
  std::vector<double> probs_;  // BoundedGeneric only
};

// g_j(s) = 1/(1 - f_j(s)) - 1/(f_j'(1)(1 - s)); s = 1 returns eta/2.
double g_eval(const OffspringLaw& law, double s);

// A realized environment: laws, increments X_k = log mean(Q_k), and partial
// sums S_0 = 0, ..., S_n.
struct EnvironmentPath {
  std::vector<OffspringLaw> laws;
  std::vector<double> increments;
  std::vector<double> sums;

  std::size_t generations() const { return laws.size(); }
};

EnvironmentPath environment_from_laws(std::vector<OffspringLaw> laws);

enum class IncrementKind : std::uint8_t { TwoPoint, Gaussian, TwoSidedPareto };

std::string increment_kind_name(IncrementKind k);
IncrementKind increment_kind_from_name(const std::string& name);

// Law of the walk increment X. All three kinds are symmetric about 0, which
// pins the Spitzer constant at rho = 1/2 analytically.
struct IncrementLaw {
  IncrementKind kind = IncrementKind::TwoPoint;
  double param = 1.0;  // c for TwoPoint, sigma for Gaussian, alpha for Pareto

  // TwoPoint steps are quantized to the 2^-26 grid (|error| <= 2^-27) so
  // walk sums stay exactly on the lattice in floating point.
  static IncrementLaw two_point(double c);
  static IncrementLaw gaussian(double sigma);
  static IncrementLaw two_sided_pareto(double alpha);

  double sample(Rng& rng) const;
  // Supremum of the support (infinity for the unbounded kinds).
  double sup_support() const;
};

// i.i.d. environment generator: an increment law for X plus the map from X to
// the offspring-law parameter (m = e^X; Binary uses p = e^X/2, which requires
// X <= log 2).
class EnvironmentModel {
 public:
  EnvironmentModel(Family family, IncrementLaw increment);

  Family family() const { return family_; }
  const IncrementLaw& increment() const { return increment_; }
  // Spitzer constant; 1/2 for every supported (symmetric) increment law.
  double rho() const { return 0.5; }

  double sample_increment(Rng& rng) const { return increment_.sample(rng); }
  OffspringLaw law_for(double x) const;
  EnvironmentPath sample_environment(std::size_t n, Rng& rng) const;

  // Step length c when the walk is TwoPoint(+-c), in which case the renewal
  // function has the exact form v(x) = floor(x/c) + 1.
  std::optional<double> exact_renewal_step() const;

  std::string to_json_string() const;
  static EnvironmentModel from_json_string(const std::string& text);

 private:
  Family family_;
  IncrementLaw increment_;
};

// Anything that can drive the walk: enough for fluctuation-only estimators.
template <class M>
concept WalkSampler = requires(const M& m, Rng& r) {
  { m.sample_increment(r) } -> std::convertible_to<double>;
};

// Anything that can drive the branching process as well.
template <class M>
concept EnvSampler = WalkSampler<M> && requires(const M& m, double x) {
  { m.law_for(x) } -> std::convertible_to<OffspringLaw>;
};

// Builds the path from drawn increments directly: S stays exactly on the
// increment lattice (log mean(law_for(x)) may differ from x by an ulp).
template <EnvSampler M>
EnvironmentPath environment_from_increments(const M& model,
                                            std::span<const double> xs) {
  EnvironmentPath env;
  env.laws.reserve(xs.size());
  env.increments.assign(xs.begin(), xs.end());
  env.sums.reserve(xs.size() + 1);
  env.sums.push_back(0.0);
  for (double x : xs) {
    env.laws.push_back(model.law_for(x));
    env.sums.push_back(env.sums.back() + x);
  }
  return env;
}

template <EnvSampler M>
EnvironmentPath sample_environment_path(const M& model, std::size_t n,
                                        Rng& rng) {
  std::vector<double> xs(n);
  for (double& x : xs) x = model.sample_increment(rng);
  return environment_from_increments(model, std::span<const double>(xs));
}

// Random law generator for property tests and the validate suite. Means are
// lognormal around 1; Binary draws p away from 0; BoundedGeneric draws a
// normalized positive vector on a support of size 3..8.
OffspringLaw sample_random_law(Family family, Rng& rng);

}  // namespace bpre
