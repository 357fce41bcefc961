#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bpre/errors.hpp"
#include "bpre/gf.hpp"
#include "bpre/offspring.hpp"
#include "bpre/stats.hpp"

namespace bpre {

// Realized generation sizes. Sizes are exact integers (stored in doubles)
// while at or below the simulation ceiling; above it the evolution switches
// to a Gaussian step in log space and the per-step flag is set. log_sizes
// carries log Z_k (-inf at 0) so that ratios like e^{-S}Z stay computable
// when Z overflows the double range.
struct PopulationPath {
  std::vector<double> sizes;      // Z_0..Z_n
  std::vector<double> log_sizes;  // log Z_0..log Z_n
  std::vector<char> step_approx;  // per step 1..n
  bool any_approx() const {
    for (char c : step_approx)
      if (c) return true;
    return false;
  }
  std::size_t steps() const { return step_approx.size(); }
};

inline constexpr std::uint64_t kDefaultCeiling = 1000000;

// One generation of quenched evolution, shared by every simulator here.
// Below the ceiling the exact aggregate sampler runs; above it
//   log Z' = log Z + X + N(0, Var(Q) / (Z mean(Q)^2)).
// Crossing back under the ceiling rounds to an integer (absorbing at 0).
struct PopulationState {
  std::uint64_t size = 1;   // valid when !approx_mode
  double log_size = 0.0;    // valid when approx_mode
  bool approx_mode = false;

  bool dead() const { return !approx_mode && size == 0; }
  double value() const {
    return approx_mode ? std::exp(log_size) : static_cast<double>(size);
  }
  double log_value() const {
    if (approx_mode) return log_size;
    return size == 0 ? -std::numeric_limits<double>::infinity()
                     : std::log(static_cast<double>(size));
  }
};

// Returns true when the step used the Gaussian aggregate.
inline bool population_step(PopulationState& st, const OffspringLaw& law,
                            std::uint64_t ceiling, Rng& rng) {
  if (st.dead()) return false;
  if (!st.approx_mode && st.size <= ceiling) {
    const OffspringDraw d = law.sample_total(st.size, rng);
    st.size = d.total;
    return d.approximate;
  }
  if (!st.approx_mode) {
    st.approx_mode = true;
    st.log_size = std::log(static_cast<double>(st.size));
  }
  const double z = std::exp(st.log_size);
  const double m = law.mean();
  const double sd2 = law.offspring_variance() / (z * m * m);
  st.log_size += std::log(m) + std::sqrt(sd2) * rng.normal();
  if (st.log_size < std::log(static_cast<double>(ceiling))) {
    st.approx_mode = false;
    st.size = static_cast<std::uint64_t>(std::exp(st.log_size) + 0.5);
  }
  return true;
}

// Quenched forward simulation along a fixed environment.
PopulationPath simulate_population(const EnvironmentPath& env,
                                   std::uint64_t z0, std::uint64_t ceiling,
                                   Rng& rng);

// mu_k = Z_0 e^{S_k} (+inf where that overflows; use rescaled_path for
// ratios).
std::vector<double> conditional_means(const PopulationPath& path,
                                      const EnvironmentPath& env);

// Z_{r + floor((n-r)t)} / mu_{...} on the grid t = 0, 1/(n-r), ..., 1;
// a single point when r = n. Evaluated in log space.
struct RescaledPath {
  std::vector<double> t;
  std::vector<double> value;
};
RescaledPath rescaled_path(const PopulationPath& path,
                           const EnvironmentPath& env, std::size_t r);

// CSV forms: (step, z, mu, flag) and (t, value).
std::string population_path_csv(const PopulationPath& path,
                                const EnvironmentPath& env);
std::string rescaled_path_csv(const RescaledPath& path);

enum class SurvivalMode { Naive, RaoBlackwell };

// Annealed survival probability P{Z_n > 0} from z0 = 1. Naive mode counts
// surviving forward simulations (Wilson CI); Rao-Blackwell mode averages the
// quenched probability 1 - f_{0,n}(0) over sampled environments, which is
// exact given the environment and has much lower variance.
template <EnvSampler M>
Estimate estimate_survival(const M& model, std::size_t n, std::uint64_t draws,
                           Rng& rng, SurvivalMode mode,
                           std::uint64_t ceiling = kDefaultCeiling) {
  if (n == 0 || draws == 0)
    throw InvalidParameter("estimate_survival: need n, draws >= 1");
  Estimate e;
  if (mode == SurvivalMode::Naive) {
    std::uint64_t alive = 0;
    for (std::uint64_t i = 0; i < draws; ++i) {
      PopulationState st;
      for (std::size_t k = 0; k < n && !st.dead(); ++k)
        population_step(st, model.law_for(model.sample_increment(rng)),
                        ceiling, rng);
      if (!st.dead()) ++alive;
    }
    e = wilson_interval(alive, draws, 0.95);
    e.method = "survival-naive";
  } else {
    MeanAcc acc;
    std::vector<OffspringLaw> laws;
    laws.reserve(n);
    for (std::uint64_t i = 0; i < draws; ++i) {
      laws.clear();
      for (std::size_t k = 0; k < n; ++k)
        laws.push_back(model.law_for(model.sample_increment(rng)));
      double r = 1.0;
      for (std::size_t j = n; j > 0; --j) r = laws[j - 1].survival_map(r);
      acc.add(r);
    }
    e = mean_estimate(acc, 0.95);
    e.method = "survival-rao-blackwell";
  }
  e.rng = {rng.seed_id(), rng.stream_id()};
  return e;
}

struct ConditionedRun {
  EnvironmentPath env;
  PopulationPath pop;
  std::uint64_t rejections = 0;
};

// Plain rejection on {Z_n > 0}: full (environment, population) pairs are
// drawn until the population is alive at n. Costs ~1/P{Z_n > 0} attempts.
template <EnvSampler M>
ConditionedRun sample_conditioned_on_survival(
    const M& model, std::size_t n, Rng& rng, std::uint64_t budget = 10000000,
    std::uint64_t ceiling = kDefaultCeiling) {
  if (n == 0) throw InvalidParameter("sample_conditioned_on_survival: n >= 1");
  std::vector<double> xs;
  std::vector<double> sizes, log_sizes;
  std::vector<char> flags;
  xs.reserve(n);
  sizes.reserve(n + 1);
  log_sizes.reserve(n + 1);
  flags.reserve(n);
  for (std::uint64_t attempt = 1; attempt <= budget; ++attempt) {
    xs.clear();
    sizes.assign(1, 1.0);
    log_sizes.assign(1, 0.0);
    flags.clear();
    PopulationState st;
    bool dead = false;
    for (std::size_t k = 0; k < n; ++k) {
      const double x = model.sample_increment(rng);
      xs.push_back(x);
      flags.push_back(population_step(st, model.law_for(x), ceiling, rng) ? 1
                                                                          : 0);
      sizes.push_back(st.value());
      log_sizes.push_back(st.log_value());
      if (st.dead()) {
        dead = true;
        break;
      }
    }
    if (dead) continue;
    ConditionedRun run;
    run.env = environment_from_increments(model, std::span<const double>(xs));
    run.pop.sizes = sizes;
    run.pop.log_sizes = log_sizes;
    run.pop.step_approx = flags;
    run.rejections = attempt - 1;
    return run;
  }
  throw BudgetExceeded("sample_conditioned_on_survival: rejection budget hit",
                       budget, 0.0);
}

}  // namespace bpre
