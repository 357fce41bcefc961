#include "bpre/walk.hpp"

#include <cmath>
#include <vector>

#include "bpre/errors.hpp"
#include "doctest.h"

using namespace bpre;

TEST_SUITE_BEGIN("walk");

TEST_CASE("fluctuation summary on hand-built paths") {
  {
    const std::vector<double> s = {0.0};
    const FluctuationSummary f = fluctuation_summary(s);
    CHECK(f.tau == 0);
    CHECK(f.ladder_epochs.empty());
    CHECK(std::isinf(f.min_excluding_start));
    CHECK(f.min_including_start() == 0.0);
    CHECK_FALSE(f.first_weak_ascending.has_value());
  }
  {
    // Tie in the minimum resolves to the first attainment.
    const std::vector<double> s = {0.0, -1.0, -1.0, 0.0};
    const FluctuationSummary f = fluctuation_summary(s);
    CHECK(f.tau == 1);
    CHECK(f.min_excluding_start == -1.0);
    CHECK(f.ladder_epochs == std::vector<std::size_t>{1});
  }
  {
    const std::vector<double> s = {0.0, -1.0, 0.5, -2.0};
    const FluctuationSummary f = fluctuation_summary(s);
    CHECK(f.ladder_epochs == std::vector<std::size_t>{1, 3});
    CHECK(f.ladder_heights == std::vector<double>{-1.0, -2.0});
    REQUIRE(f.first_weak_ascending.has_value());
    CHECK(*f.first_weak_ascending == 2);
    CHECK(f.first_weak_ascending_height == 0.5);
    CHECK(f.tau == 3);
    CHECK(f.min_including_start() == -2.0);
  }
  CHECK_THROWS_AS(fluctuation_summary(std::vector<double>{}),
                  InvalidParameter);
  CHECK_THROWS_AS(fluctuation_summary(std::vector<double>{1.0, 2.0}),
                  InvalidParameter);
}

TEST_CASE("fluctuation summary is deterministic") {
  Rng rng(20);
  std::vector<double> s(501, 0.0);
  for (std::size_t i = 1; i < s.size(); ++i)
    s[i] = s[i - 1] + rng.normal();
  const FluctuationSummary a = fluctuation_summary(s);
  const FluctuationSummary b = fluctuation_summary(s);
  CHECK(a.tau == b.tau);
  CHECK(a.ladder_epochs == b.ladder_epochs);
  CHECK(a.ladder_heights == b.ladder_heights);
}

TEST_CASE("prospective minima on the worked example") {
  const std::vector<double> s = {0.0, -1.0, 1.0, -0.5, 2.0, 3.0};
  const ProspectiveMinima pm = prospective_minima(s, 2);
  REQUIRE(pm.indices.size() == 4);
  CHECK(pm.indices == std::vector<std::size_t>{1, 3, 4, 5});
  CHECK(pm.censored == std::vector<char>{0, 0, 1, 1});
  // Full-future check at w = 4 also qualifies indices 1 and 3.
  const ProspectiveMinima full = prospective_minima(s, 4);
  CHECK(full.indices.front() == 1);
  CHECK(full.censored.front() == 0);
  CHECK_THROWS_AS(prospective_minima(s, 0), InvalidParameter);
}

TEST_CASE("prospective minima on a strictly increasing path") {
  std::vector<double> s(11);
  for (std::size_t i = 0; i <= 10; ++i) s[i] = static_cast<double>(i);
  const ProspectiveMinima pm = prospective_minima(s, 10);
  REQUIRE(pm.indices.size() == 10);
  for (std::size_t j = 0; j < 10; ++j) {
    CHECK(pm.indices[j] == j + 1);
    CHECK(pm.censored[j] == (10 - (j + 1) < 10 ? 1 : 0));
  }
}

TEST_CASE("exact two-point renewal closed form") {
  const EnvironmentModel model(Family::LinearFractionalGeometric,
                               IncrementLaw::two_point(1.0));
  Rng rng(21);
  const RenewalTable table =
      estimate_renewal_v(model, {0.0, 1.0, 2.0, 3.5}, 10, rng);
  CHECK(table.exact);
  CHECK(table.value(-0.5) == 0.0);
  CHECK(table.value(0.0) == 1.0);
  CHECK(table.value(3.5) == 4.0);
  CHECK(table.value(2.0) == 3.0);
  CHECK(table.stderr_at(1.0) == 0.0);
  const std::string csv = table.to_csv();
  CHECK(csv.find("x,v_hat,stderr,exact_flag") == 0);
  CHECK(csv.find(",1\n") != std::string::npos);
}

TEST_CASE("monte carlo renewal estimators recover the lattice closed form") {
  const EnvironmentModel model(Family::LinearFractionalGeometric,
                               IncrementLaw::two_point(1.0));
  const std::vector<double> grid = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  Rng r1(22), r2(23);
  const RenewalTable ladder = estimate_renewal_v_mc(model, grid, 20000, r1);
  const RenewalTable tau = estimate_renewal_v_tau(model, grid, 20000, r2);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double truth = std::floor(grid[g]) + 1.0;
    // On the lattice the per-walk counts are deterministic, so the only
    // error is the recorded step-cap censoring (an undercount of at most
    // `truth` per censored walk).
    const double ladder_tol =
        4.0 * ladder.stderr_v[g] + ladder.censored_fraction * truth + 1e-12;
    const double tau_tol =
        4.0 * tau.stderr_v[g] + tau.censored_fraction * truth + 1e-12;
    CHECK(truth - ladder.v_hat[g] >= -1e-12);
    CHECK(truth - ladder.v_hat[g] < ladder_tol);
    CHECK(truth - tau.v_hat[g] >= -1e-12);
    CHECK(truth - tau.v_hat[g] < tau_tol);
  }
  CHECK(ladder.censored_fraction < 0.01);
  CHECK(ladder.walks == 20000);
}

TEST_CASE("renewal estimator rejects bad grids") {
  const EnvironmentModel model(Family::Poisson, IncrementLaw::gaussian(1.0));
  Rng rng(24);
  CHECK_THROWS_AS(estimate_renewal_v_mc(model, {}, 10, rng), InvalidParameter);
  CHECK_THROWS_AS(estimate_renewal_v_mc(model, {-1.0, 0.0}, 10, rng),
                  InvalidParameter);
  CHECK_THROWS_AS(estimate_renewal_v_mc(model, {0.0, 0.0}, 10, rng),
                  InvalidParameter);
}

TEST_CASE("renewal budget signals when walks cannot reach the depth") {
  // A strongly upward-drifting walk essentially never ladders down to -8.
  struct DriftModel {
    double sample_increment(Rng& rng) const {
      return 0.95 + 0.1 * rng.uniform();
    }
  } model;
  Rng rng(25);
  RenewalOptions opt;
  opt.max_steps_per_walk = 2000;
  CHECK_THROWS_AS(estimate_renewal_v_mc(model, {0.0, 8.0}, 50, rng, opt),
                  BudgetExceeded);
}

TEST_CASE("harmonicity: exact on the lattice, statistical for gaussian") {
  const EnvironmentModel tp(Family::LinearFractionalGeometric,
                            IncrementLaw::two_point(1.0));
  Rng rng(26);
  const RenewalTable exact = estimate_renewal_v(tp, {0.0, 1.0}, 10, rng);
  for (double x : {0.0, 1.0, 2.0, 5.0}) {
    const Estimate res = check_harmonicity(exact, tp, x, 100, rng);
    CHECK(res.value == 0.0);
  }

  const EnvironmentModel gauss(Family::Poisson, IncrementLaw::gaussian(1.0));
  Rng grng(27);
  std::vector<double> grid;
  for (int g = 0; g < 24; ++g) grid.push_back(0.125 * g);
  const RenewalTable table = estimate_renewal_v_mc(gauss, grid, 30000, grng);
  const Estimate res = check_harmonicity(table, gauss, 1.0, 100000, grng);
  CHECK(res.contains(0.0));
}

TEST_CASE("spitzer constant is 1/2 for symmetric increments") {
  Rng rng(28);
  // Continuous symmetric laws: P{S_m > 0} = 1/2 at every m.
  for (const IncrementLaw& inc :
       {IncrementLaw::gaussian(1.0), IncrementLaw::two_sided_pareto(1.0)}) {
    const EnvironmentModel model(Family::Poisson, inc);
    CHECK(model.rho() == 0.5);
    const SpitzerEstimate est = estimate_rho(model, 64, 8000, rng);
    const double se = (est.ci_high - est.rho_hat) / 1.959964;
    CHECK(std::abs(est.rho_hat - 0.5) <= 4.0 * se);
    CHECK(est.per_m.size() == 64);
  }
  // Lattice walk: the strict probabilities sit below 1/2 by half the mass
  // at 0, which is exactly computable; the Cesaro mean must cover that
  // finite-n value, and 1/2 itself once n is large.
  const EnvironmentModel tp(Family::LinearFractionalGeometric,
                            IncrementLaw::two_point(1.0));
  const auto lattice_deficit = [](std::size_t n) {
    double correction = 0.0;
    for (std::size_t m = 2; m <= n; m += 2)
      correction += two_point_prob_min_nonneg(m);  // = P{S_m = 0} for even m
    return correction / (2.0 * static_cast<double>(n));
  };
  for (std::size_t n : {64, 4096}) {
    const double expected = 0.5 - lattice_deficit(n);
    const SpitzerEstimate est = estimate_rho(tp, n, n == 64 ? 8000 : 2000, rng);
    const double se = (est.ci_high - est.rho_hat) / 1.959964;
    CHECK(std::abs(est.rho_hat - expected) <= 4.0 * se);
  }
  // The deficit is the o(n) strict-vs-weak term: it shrinks with n.
  CHECK(lattice_deficit(4096) < 0.25 * lattice_deficit(64));
}

TEST_CASE("slowly varying l against closed forms") {
  // P{S_m >= 0} == rho makes h == 1, so l(n) = 1/Gamma(rho) for every n.
  std::vector<double> flat(3000, 0.5);
  for (std::size_t n : {2, 64, 1024}) {
    const SlowlyVaryingL l = slowly_varying_l(flat, 0.5, n);
    CHECK(l.value == doctest::Approx(1.0 / std::sqrt(M_PI)).epsilon(1e-12));
  }
  std::vector<double> flat7(3000, 0.7);
  const SlowlyVaryingL l7 = slowly_varying_l(flat7, 0.7, 100);
  CHECK(l7.value == doctest::Approx(1.0 / std::tgamma(0.7)).epsilon(1e-12));

  // Exact binomial probabilities for the +-1 walk give a finite, slowly
  // varying l: l(2n)/l(n) -> 1.
  std::vector<double> exact(40960);
  for (std::size_t m = 1; m <= exact.size(); ++m)
    exact[m - 1] = two_point_prob_nonneg(m);
  const double l512 = slowly_varying_l(exact, 0.5, 512).value;
  const double l1024 = slowly_varying_l(exact, 0.5, 1024).value;
  CHECK(std::isfinite(l512));
  CHECK(l1024 / l512 == doctest::Approx(1.0).epsilon(0.01));

  // Horizon too short for the requested n: the tail bound blows up.
  std::vector<double> biased(50, 0.6);
  CHECK_THROWS_AS(slowly_varying_l(biased, 0.5, 10000), InsufficientHorizon);
}

TEST_CASE("exact lattice probabilities") {
  CHECK(two_point_prob_nonneg(0) == 1.0);
  CHECK(two_point_prob_nonneg(1) == 0.5);
  CHECK(two_point_prob_nonneg(2) == 0.75);
  CHECK(two_point_prob_nonneg(3) == 0.5);
  CHECK(two_point_prob_min_nonneg(1) == 0.5);
  CHECK(two_point_prob_min_nonneg(2) == 0.5);
  CHECK(two_point_prob_min_nonneg(3) == doctest::Approx(0.375));
  // Monte Carlo spot check at n = 20.
  Rng rng(29);
  int hits = 0;
  const int reps = 200000;
  for (int i = 0; i < reps; ++i) {
    int s = 0;
    bool ok = true;
    for (int k = 0; k < 20; ++k) {
      s += rng.bernoulli(0.5) ? 1 : -1;
      if (s < 0) {
        ok = false;
        break;
      }
    }
    if (ok) ++hits;
  }
  const double phat = static_cast<double>(hits) / reps;
  const double truth = two_point_prob_min_nonneg(20);
  CHECK(std::abs(phat - truth) < 4.0 * std::sqrt(truth * (1 - truth) / reps));
}

TEST_CASE("renewal tables expose the extrapolation slope") {
  const EnvironmentModel model(Family::Poisson, IncrementLaw::gaussian(1.0));
  Rng rng(30);
  std::vector<double> grid;
  for (int g = 0; g < 12; ++g) grid.push_back(0.2 * g);
  const RenewalTable table = estimate_renewal_v_mc(model, grid, 20000, rng);
  const double inside = table.value(grid.back());
  const double outside = table.value(grid.back() + 1.0);
  CHECK(outside == doctest::Approx(inside + table.slope).epsilon(1e-12));
  CHECK(table.slope > 0.0);
}

TEST_SUITE_END();
