#include "bpre/gf.hpp"

#include <cmath>
#include <vector>

#include "bpre/errors.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace bpre;
using bpre::testing::enumerated_survival;

namespace {

EnvironmentPath random_env(Family family, std::size_t n, Rng& rng) {
  std::vector<OffspringLaw> laws;
  laws.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    laws.push_back(sample_random_law(family, rng));
  return environment_from_laws(std::move(laws));
}

}  // namespace

TEST_SUITE_BEGIN("gf");

TEST_CASE("survival along deterministic environments") {
  // Everybody doubles: survival is certain.
  const EnvironmentPath doubling = environment_from_laws(
      std::vector<OffspringLaw>(5, OffspringLaw::bounded({0.0, 0.0, 1.0})));
  for (std::size_t k = 0; k <= 5; ++k)
    CHECK(survival_given_env(doubling, k, 0.0) == 1.0);

  // Near-certain extinction in one step; the mean-zero law itself is not a
  // valid environment member (X = log m must be finite), so take the limit
  // law with a denormal-sized branching atom.
  const EnvironmentPath dying = environment_from_laws(
      {OffspringLaw::bounded({1.0 - 1e-300, 1e-300})});
  CHECK(survival_given_env(dying, 0, 0.0) == 1e-300);

  // Two binary generations: survival 3/8 by direct tree enumeration.
  const EnvironmentPath binary = environment_from_laws(
      std::vector<OffspringLaw>(2, OffspringLaw::binary(0.5)));
  CHECK(survival_given_env(binary, 0, 0.0) == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(survival_given_env(binary, 2, 0.0) == 1.0);  // r_{n,n} = 1 - s
}

TEST_CASE("survival profile is monotone and consistent") {
  Rng rng(40);
  const EnvironmentPath env = random_env(Family::Poisson, 30, rng);
  const std::vector<double> prof = survival_profile(env, 0, 0.0);
  REQUIRE(prof.size() == 31);
  CHECK(prof.back() == 1.0);
  for (std::size_t j = 0; j < 30; ++j)
    CHECK(prof[j] == env.laws[j].survival_map(prof[j + 1]));
  CHECK(prof[0] == survival_given_env(env, 0, 0.0));
}

TEST_CASE("survival matches exact tree enumeration on bounded laws") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 3;
    std::vector<OffspringLaw> laws;
    for (std::size_t k = 0; k < n; ++k)
      laws.push_back(sample_random_law(
          trial % 2 == 0 ? Family::BoundedGeneric : Family::Binary, rng));
    const double oracle = enumerated_survival(laws);
    const EnvironmentPath env = environment_from_laws(std::move(laws));
    CHECK(survival_given_env(env, 0, 0.0) ==
          doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("g evaluations") {
  CHECK(g_eval(OffspringLaw::poisson(0.7), 1.0) == 0.5);
  CHECK(g_eval(OffspringLaw::poisson(13.0), 1.0) == 0.5);
  for (double s : {0.0, 0.3, 0.9, 1.0}) {
    CHECK(g_eval(OffspringLaw::linear_fractional(0.4), s) == 1.0);
    CHECK(g_eval(OffspringLaw::linear_fractional(2.5), s) == 1.0);
  }
  const double p = 0.35;
  CHECK(g_eval(OffspringLaw::binary(p), 0.0) ==
        doctest::Approx(1.0 / (2.0 * p)).epsilon(1e-14));
  // Degenerate Q({1}) = 1: g == 0 including the limit branch.
  const OffspringLaw copy = OffspringLaw::bounded({0.0, 1.0});
  CHECK(g_eval(copy, 0.5) == 0.0);
  CHECK(g_eval(copy, 1.0) == 0.0);
}

TEST_CASE("g bounds 0 <= g <= eta on a random corpus") {
  Rng rng(42);
  for (int i = 0; i < 5000; ++i) {
    const OffspringLaw law = sample_random_law(static_cast<Family>(i % 4), rng);
    const double s = i % 7 == 0 ? 1.0 : rng.uniform();
    const double g = g_eval(law, s);
    CHECK(g >= 0.0);
    CHECK(g <= law.eta() * (1.0 + 1e-12) + 1e-15);
  }
}

TEST_CASE("g is accurate deep in the small-survival regime") {
  // r tiny: g must approach eta/2 without cancellation blowups.
  for (Family f : {Family::Poisson, Family::BoundedGeneric}) {
    Rng rng(43);
    const OffspringLaw law = f == Family::Poisson
                                 ? OffspringLaw::poisson(1.3)
                                 : sample_random_law(f, rng);
    const double half_eta = 0.5 * law.eta();
    for (double r : {1e-3, 1e-6, 1e-9, 1e-12}) {
      const double g = law.g_survival(r);
      CHECK(g == doctest::Approx(half_eta).epsilon(2e-3 * 1e3 * r + 1e-9));
    }
  }
}

TEST_CASE("jirina identity residual") {
  Rng rng(44);
  // Single step: the identity reduces to the definition of g.
  const EnvironmentPath one = random_env(Family::Poisson, 1, rng);
  CHECK(jirina_residual(one, 0, 0.3) <= 1e-14);

  // Random 20-law Poisson environment at s = 0.5.
  const EnvironmentPath poisson20 = random_env(Family::Poisson, 20, rng);
  CHECK(jirina_residual(poisson20, 0, 0.5) <= 1e-10);

  // Linear-fractional environment at s = 0, where the right-hand side is a
  // closed form.
  const EnvironmentPath lf =
      random_env(Family::LinearFractionalGeometric, 25, rng);
  CHECK(jirina_residual(lf, 0, 0.0) <= 1e-10);

  // Mixed-family random corpus.
  for (int i = 0; i < 300; ++i) {
    const EnvironmentPath env =
        random_env(static_cast<Family>(i % 4), 2 + rng.next_u64() % 30, rng);
    const std::size_t k = rng.next_u64() % env.generations();
    const double s = rng.uniform(0.0, 0.95);
    CHECK(jirina_residual(env, k, s) <= 1e-9);
  }
}

TEST_CASE("agresti bound never exceeds the exact survival") {
  Rng rng(45);
  for (int i = 0; i < 2000; ++i) {
    const EnvironmentPath env =
        random_env(static_cast<Family>(i % 4), 1 + rng.next_u64() % 30, rng);
    const std::size_t k = rng.next_u64() % env.generations();
    const double s = rng.uniform(0.0, 0.999);
    const double bound = agresti_lower_bound(env, k, s);
    const double exact = survival_given_env(env, k, s);
    CHECK(bound > 0.0);
    CHECK(bound <= exact * (1.0 + 1e-12));
  }
  // The doubling environment keeps the bound below the certain survival.
  const EnvironmentPath doubling = environment_from_laws(
      std::vector<OffspringLaw>(6, OffspringLaw::bounded({0.0, 0.0, 1.0})));
  CHECK(agresti_lower_bound(doubling, 0, 0.0) <= 1.0);
}

TEST_CASE("quenched survival bound (min of the walk)") {
  Rng rng(46);
  for (int i = 0; i < 200; ++i) {
    const EnvironmentPath env =
        random_env(static_cast<Family>(i % 4), 2 + rng.next_u64() % 40, rng);
    double min_s = 0.0;
    for (double s : env.sums) min_s = std::min(min_s, s);
    CHECK(survival_given_env(env, 0, 0.0) <=
          std::exp(min_s) * (1.0 + 1e-12));
  }
}

TEST_CASE("linear-fractional closed form") {
  // One critical geometric generation: survival 1/2, which also equals
  // 1 - Q({0}).
  const EnvironmentPath one = environment_from_laws(
      {OffspringLaw::linear_fractional(1.0)});
  CHECK(lf_survival_exact(one, 0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(1.0 - one.laws[0].pgf(0.0) == doctest::Approx(0.5));

  // Constant mean-1 environment: survival after n steps is 1/(1+n).
  for (std::size_t n : {1, 4, 16, 64}) {
    const EnvironmentPath env = environment_from_laws(
        std::vector<OffspringLaw>(n, OffspringLaw::linear_fractional(1.0)));
    CHECK(lf_survival_exact(env, 0, n) ==
          doctest::Approx(1.0 / (1.0 + static_cast<double>(n))).epsilon(1e-14));
    CHECK(survival_given_env(env, 0, 0.0) ==
          doctest::Approx(1.0 / (1.0 + static_cast<double>(n))).epsilon(1e-13));
  }

  // Two independent evaluation paths agree to 1e-12 relative.
  Rng rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.next_u64() % 499;
    const EnvironmentPath env =
        random_env(Family::LinearFractionalGeometric, n, rng);
    const std::size_t k = rng.next_u64() % n;
    const double closed = lf_survival_exact(env, k, n);
    const double recursed = survival_given_env(env, k, 0.0);
    CHECK(std::abs(closed - recursed) <= 1e-12 * closed);
  }

  const EnvironmentPath wrong =
      environment_from_laws({OffspringLaw::poisson(1.0)});
  CHECK_THROWS_AS(lf_survival_exact(wrong, 0, 1), WrongFamily);
}

TEST_CASE("linear-fractional infinite horizon") {
  Rng rng(48);
  for (int trial = 0; trial < 40; ++trial) {
    const EnvironmentPath env =
        random_env(Family::LinearFractionalGeometric, 300, rng);
    // Finite-horizon survival decreases with the horizon...
    double prev = 2.0;
    for (std::size_t h : {30, 60, 120, 240, 300}) {
      const double v = lf_survival_exact(env, 0, h);
      CHECK(v <= prev * (1.0 + 1e-12));
      prev = v;
    }
    // ...and brackets the within-path infinite form from below: the
    // infinite evaluation drops the endpoint mass e^{-S_n}, so it sits at
    // or above every finite-horizon value, within the reported tail bound.
    const LfInfiniteSurvival inf = lf_survival_exact_infinite(env, 0);
    CHECK(prev <= inf.value * (1.0 + 1e-12));
    CHECK(inf.value - prev <= inf.tail_bound + 1e-12 * inf.value);
    CHECK(inf.value > 0.0);
  }
}

TEST_CASE("input validation") {
  Rng rng(49);
  const EnvironmentPath env = random_env(Family::Poisson, 5, rng);
  CHECK_THROWS_AS(survival_given_env(env, 9, 0.0), InvalidParameter);
  CHECK_THROWS_AS(survival_given_env(env, 0, 1.5), InvalidParameter);
  CHECK_THROWS_AS(jirina_residual(env, 5, 0.0), InvalidParameter);
  CHECK_THROWS_AS(jirina_residual(env, 0, 1.0), InvalidParameter);
  CHECK_THROWS_AS(agresti_lower_bound(env, 0, 1.0), InvalidParameter);
}

TEST_SUITE_END();
