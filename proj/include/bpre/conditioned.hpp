#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "bpre/branching.hpp"
#include "bpre/errors.hpp"
#include "bpre/gf.hpp"
#include "bpre/offspring.hpp"
#include "bpre/stats.hpp"
#include "bpre/walk.hpp"

namespace bpre {

// The conditioned measure P+ has density v(S_n) 1{L_n >= 0} w.r.t. P on the
// first n steps. Two sampling routes are used throughout:
//   weighted    - raw paths carrying weight v(S_n) 1{L_n >= 0}; unbiased for
//                 step-n-measurable functionals whenever v is exact (TwoPoint
//                 walks), up to v-hat error otherwise;
//   conditional - rejection on {L_n >= 0}; bias vanishes as n grows past the
//                 functional's horizon.

// Fills s (size n+1, s[0] = 0) with a walk conditioned on min(S_1..S_n) >= 0.
// Returns the number of rejected attempts.
template <WalkSampler M>
std::uint64_t sample_walk_conditioned(const M& model, std::size_t n, Rng& rng,
                                      std::vector<double>& s,
                                      std::uint64_t budget = 100000000) {
  if (n == 0) throw InvalidParameter("sample_walk_conditioned: n >= 1");
  s.resize(n + 1);
  s[0] = 0.0;
  for (std::uint64_t attempt = 1; attempt <= budget; ++attempt) {
    bool ok = true;
    double cur = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      cur += model.sample_increment(rng);
      if (cur < 0.0) {
        ok = false;
        break;
      }
      s[k] = cur;
    }
    if (ok) return attempt - 1;
  }
  throw BudgetExceeded("sample_walk_conditioned: rejection budget hit", budget,
                       0.0);
}

struct ConditionedEnv {
  EnvironmentPath env;
  std::uint64_t rejections = 0;
};

// Rejection sampling of full environments given {L_n >= 0}; laws are only
// materialized for the accepted path.
template <EnvSampler M>
ConditionedEnv sample_walk_given_Ln(const M& model, std::size_t n, Rng& rng,
                                    std::uint64_t budget = 100000000) {
  if (n == 0) throw InvalidParameter("sample_walk_given_Ln: n >= 1");
  std::vector<double> xs(n);
  for (std::uint64_t attempt = 1; attempt <= budget; ++attempt) {
    bool ok = true;
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      xs[k] = model.sample_increment(rng);
      s += xs[k];
      if (s < 0.0) {
        ok = false;
        break;
      }
    }
    if (ok)
      return {environment_from_increments(model, std::span<const double>(xs)),
              attempt - 1};
  }
  throw BudgetExceeded("sample_walk_given_Ln: rejection budget hit", budget,
                       0.0);
}

struct PlusSamplingStats {
  std::uint64_t raw_paths = 0;
  std::uint64_t accepted = 0;
  double weight_sum = 0.0;
  double weight_sq_sum = 0.0;
  bool weighted = false;
  double ess() const {
    return weight_sq_sum > 0.0 ? weight_sum * weight_sum / weight_sq_sum
                               : static_cast<double>(accepted);
  }
};

// Visits P+ environments of length n until the effective sample size reaches
// target_ess. With a renewal table the weighted route is used (exact when the
// table is exact); otherwise rejection with unit weights. fn(env, weight).
template <EnvSampler M, class Fn>
PlusSamplingStats for_each_plus_env(const M& model, std::size_t n,
                                    double target_ess, Rng& rng, Fn&& fn,
                                    const RenewalTable* v = nullptr,
                                    std::uint64_t max_raw = 1000000000) {
  PlusSamplingStats st;
  st.weighted = v != nullptr;
  std::vector<double> xs(n);
  while (st.ess() < target_ess) {
    if (st.raw_paths >= max_raw)
      throw BudgetExceeded("for_each_plus_env: raw path budget hit", max_raw,
                           st.ess());
    if (st.weighted) {
      ++st.raw_paths;
      bool ok = true;
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        xs[k] = model.sample_increment(rng);
        s += xs[k];
        if (s < 0.0) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      const double w = v->value(s);
      ++st.accepted;
      st.weight_sum += w;
      st.weight_sq_sum += w * w;
      fn(environment_from_increments(model, std::span<const double>(xs)), w);
    } else {
      ConditionedEnv ce = sample_walk_given_Ln(model, n, rng,
                                               max_raw - st.raw_paths);
      st.raw_paths += ce.rejections + 1;
      ++st.accepted;
      st.weight_sum += 1.0;
      st.weight_sq_sum += 1.0;
      fn(std::move(ce.env), 1.0);
    }
  }
  return st;
}

enum class PlusMode { Weighted, Conditional };

// E+ of a functional of the first k steps (receives S_0..S_k).
//   Weighted:    mean of Y v(S_n) 1{L_n >= 0} over `draws` raw paths.
//   Conditional: mean of Y over `draws` accepted {L_n >= 0} paths.
template <WalkSampler M>
Estimate plus_expectation(const M& model,
                          const std::function<double(std::span<const double>)>& y,
                          std::size_t k, std::size_t n, std::uint64_t draws,
                          Rng& rng, PlusMode mode,
                          const RenewalTable* v = nullptr) {
  if (k > n || n == 0 || draws == 0)
    throw InvalidParameter("plus_expectation: need 1 <= k <= n, draws >= 1");
  Estimate e;
  e.rng = {rng.seed_id(), rng.stream_id()};
  std::vector<double> s(n + 1, 0.0);
  if (mode == PlusMode::Weighted) {
    if (!v)
      throw InvalidParameter("plus_expectation: weighted mode needs a renewal table");
    MeanAcc acc;
    bool any_weight = false;
    for (std::uint64_t i = 0; i < draws; ++i) {
      bool ok = true;
      double cur = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        cur += model.sample_increment(rng);
        if (cur < 0.0) {
          ok = false;
          break;
        }
        s[j] = cur;
      }
      if (!ok) {
        acc.add(0.0);
        continue;
      }
      any_weight = true;
      acc.add(y(std::span<const double>(s.data(), k + 1)) * v->value(s[n]));
    }
    if (!any_weight)
      throw DegenerateSample("plus_expectation: all weights zero");
    e = mean_estimate(acc, 0.95);
    e.method = "plus-weighted";
  } else {
    MeanAcc acc;
    for (std::uint64_t i = 0; i < draws; ++i) {
      sample_walk_conditioned(model, n, rng, s);
      acc.add(y(std::span<const double>(s.data(), k + 1)));
    }
    e = mean_estimate(acc, 0.95);
    e.method = "plus-conditional";
  }
  return e;
}

// Partial sums sum_{k < K} eta_{k+1} e^{-S_k} along a (conditioned) path.
std::vector<double> eta_series_partial_sums(const EnvironmentPath& env,
                                            std::size_t terms);

// (last decade of a nondecreasing partial-sum sequence) / (final value).
double last_decade_relative_increment(std::span<const double> partial_sums);

// ---------------------------------------------------------------------------
// Tanaka ladder identity, Lemma-2.6(iii) style:
//   P+{nu = k, S_nu in dx} = P{iota = k, S_iota in dx}.
// The nu side is sampled under P+ via v-weighted raw paths, the iota side
// under plain P. Both sides are restricted to epochs <= t0 and compared by
// weighted KS on the epoch and height marginals.
// ---------------------------------------------------------------------------

enum class NuDetection {
  // First m with S_{m+i} >= S_m over the next `lookahead` steps. False
  // positives (the walk undercuts S_m after the window) decay like
  // lookahead^{-1/2}, so this detector needs a wide window.
  Lookahead,
  // First within-path prospective minimum is the first argmin m1 of S_1..S_n;
  // the chance that the unseen future never undercuts it is exactly
  // v(S_n - S_m1)/v(S_n), so (m1, S_m1) is emitted with weight v(S_n - S_m1)
  // and the remainder v(S_n) - v(S_n - S_m1) is exactly-weighted censored
  // mass. Requires an exact renewal table (TwoPoint walks). No detection
  // bias at any n.
  ExactTail,
};

struct TanakaSamples {
  std::vector<double> nu_epoch, nu_height, nu_post_increment, nu_weight;
  double nu_emitted_weight = 0.0;
  double nu_beyond_weight = 0.0;    // known nu > t0
  double nu_censored_weight = 0.0;  // classification unknown
  double nu_total_weight = 0.0;
  std::uint64_t raw_paths = 0;

  std::vector<double> iota_epoch, iota_height;
  std::uint64_t iota_beyond = 0;
  std::uint64_t iota_draws = 0;

  double nu_censored_fraction() const {
    return nu_total_weight > 0.0 ? nu_censored_weight / nu_total_weight : 0.0;
  }
};

struct TanakaCheck {
  TanakaSamples samples;
  KsResult ks_epoch;
  KsResult ks_height;
  // P+{nu <= t0} vs P{iota <= t0} with a 4-sigma comparison band.
  double nu_mass = 0.0, nu_mass_se = 0.0;
  double iota_mass = 0.0, iota_mass_se = 0.0;
  bool mass_agrees() const {
    const double se = std::sqrt(nu_mass_se * nu_mass_se +
                                iota_mass_se * iota_mass_se);
    return std::abs(nu_mass - iota_mass) <= 4.0 * se;
  }
};

template <WalkSampler M>
TanakaSamples tanaka_nu_samples(const M& model, const RenewalTable& v,
                                std::size_t n, std::size_t lookahead,
                                std::size_t t0, double target_ess, Rng& rng,
                                NuDetection detection,
                                std::uint64_t max_raw = 2000000000) {
  if (t0 == 0 || t0 > n) throw InvalidParameter("tanaka: need 1 <= t0 <= n");
  if (detection == NuDetection::Lookahead && t0 + lookahead > n)
    throw InvalidParameter("tanaka: lookahead window must fit: t0 + w <= n");
  if (detection == NuDetection::ExactTail && !v.exact)
    throw InvalidParameter("tanaka: exact-tail detection needs an exact table");
  TanakaSamples out;
  std::vector<double> s(n + 1, 0.0);
  double wsum = 0.0, w2sum = 0.0;  // emitted weights, for the ESS stop rule
  while (out.raw_paths < max_raw) {
    if (w2sum > 0.0 && wsum * wsum / w2sum >= target_ess) break;
    ++out.raw_paths;
    bool ok = true;
    double cur = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
      cur += model.sample_increment(rng);
      if (cur < 0.0) {
        ok = false;
        break;
      }
      s[j] = cur;
    }
    if (!ok) continue;
    const double vn = v.value(s[n]);
    out.nu_total_weight += vn;
    if (detection == NuDetection::ExactTail) {
      std::size_t m1 = 1;
      double best = s[1];
      for (std::size_t m = 2; m <= n; ++m)
        if (s[m] < best) {
          best = s[m];
          m1 = m;
        }
      const double w_main = v.value(s[n] - s[m1]);
      const double w_cens = vn - w_main;
      out.nu_censored_weight += w_cens;
      if (m1 <= t0) {
        out.nu_epoch.push_back(static_cast<double>(m1));
        out.nu_height.push_back(s[m1]);
        // No look-forward exists when the argmin is the last index; callers
        // keep t0 well below n, so the NaN sentinel stays out of statistics.
        out.nu_post_increment.push_back(
            m1 < n ? s[m1 + 1] - s[m1]
                   : std::numeric_limits<double>::quiet_NaN());
        out.nu_weight.push_back(w_main);
        out.nu_emitted_weight += w_main;
        wsum += w_main;
        w2sum += w_main * w_main;
      } else {
        out.nu_beyond_weight += w_main;
      }
    } else {
      // Sliding-window minimum over [m+1, m+lookahead], first qualifying m.
      std::deque<std::size_t> win;
      for (std::size_t j = 1; j <= lookahead; ++j) {
        while (!win.empty() && s[win.back()] >= s[j]) win.pop_back();
        win.push_back(j);
      }
      std::optional<std::size_t> found;
      for (std::size_t m = 1; m <= t0; ++m) {
        if (m + lookahead <= n) {
          const std::size_t j = m + lookahead;
          while (!win.empty() && s[win.back()] >= s[j]) win.pop_back();
          win.push_back(j);
        }
        while (!win.empty() && win.front() <= m) win.pop_front();
        if (win.empty() || s[win.front()] >= s[m]) {
          found = m;
          break;
        }
      }
      if (found) {
        out.nu_epoch.push_back(static_cast<double>(*found));
        out.nu_height.push_back(s[*found]);
        out.nu_post_increment.push_back(s[*found + 1] - s[*found]);
        out.nu_weight.push_back(vn);
        out.nu_emitted_weight += vn;
        wsum += vn;
        w2sum += vn * vn;
      } else {
        // Cannot tell nu > t0 from a missed detection: censored.
        out.nu_censored_weight += vn;
      }
    }
  }
  if (out.nu_weight.empty())
    throw DegenerateSample("tanaka: no prospective minima detected");
  return out;
}

template <WalkSampler M>
void tanaka_iota_samples(const M& model, std::size_t t0, std::uint64_t draws,
                         Rng& rng, TanakaSamples& out) {
  out.iota_draws = draws;
  for (std::uint64_t i = 0; i < draws; ++i) {
    double s = 0.0;
    bool found = false;
    for (std::size_t m = 1; m <= t0; ++m) {
      s += model.sample_increment(rng);
      if (s >= 0.0) {
        out.iota_epoch.push_back(static_cast<double>(m));
        out.iota_height.push_back(s);
        found = true;
        break;
      }
    }
    if (!found) ++out.iota_beyond;
  }
}

template <WalkSampler M>
TanakaCheck tanaka_ladder_check(const M& model, const RenewalTable& v,
                                std::size_t n, std::size_t lookahead,
                                std::size_t t0, double target_ess,
                                std::uint64_t iota_draws, Rng& rng,
                                NuDetection detection, double alpha = 0.01,
                                double max_censored = 0.01) {
  TanakaCheck check;
  Rng nu_rng = rng.split(1);
  Rng iota_rng = rng.split(2);
  check.samples = tanaka_nu_samples(model, v, n, lookahead, t0, target_ess,
                                    nu_rng, detection);
  tanaka_iota_samples(model, t0, iota_draws, iota_rng, check.samples);
  const TanakaSamples& ts = check.samples;
  if (ts.nu_censored_fraction() > max_censored)
    throw ExcessCensoring("tanaka: censored prospective-minimum mass above bound");
  check.ks_epoch = ks_two_sample(ts.nu_epoch, ts.nu_weight, ts.iota_epoch, {},
                                 alpha);
  check.ks_height = ks_two_sample(ts.nu_height, ts.nu_weight, ts.iota_height,
                                  {}, alpha);
  // Restricted masses: each raw nu path contributes its emitted weight
  // (mean E[w 1{nu <= t0}] = P+{nu <= t0} for the exact detector).
  check.nu_mass =
      ts.nu_emitted_weight / static_cast<double>(ts.raw_paths);
  double var = 0.0;
  {
    // weights are sparse among raw paths; reconstruct second moment
    double sum_sq = 0.0;
    for (double w : ts.nu_weight) sum_sq += w * w;
    const double mean = check.nu_mass;
    var = sum_sq / static_cast<double>(ts.raw_paths) - mean * mean;
  }
  check.nu_mass_se =
      std::sqrt(std::max(0.0, var) / static_cast<double>(ts.raw_paths));
  const std::uint64_t hits = ts.iota_epoch.size();
  check.iota_mass =
      static_cast<double>(hits) / static_cast<double>(ts.iota_draws);
  check.iota_mass_se = std::sqrt(check.iota_mass * (1.0 - check.iota_mass) /
                                 static_cast<double>(ts.iota_draws));
  return check;
}

// ---------------------------------------------------------------------------
// W+ and ultimate survival under the conditioned environment.
// ---------------------------------------------------------------------------

struct WplusResult {
  // Empirical law of e^{-S_m} Z_m over conditioned environments.
  std::vector<double> w_values;
  std::vector<double> w_weights;
  Estimate p_w_positive;  // weighted P{Z_m > 0}
  // Quenched ultimate survival, averaged over the conditioned environments:
  // exact (linear-fractional closed form) when available, and always the
  // bracket [truncated eta-series minorant, horizon-m survival].
  std::optional<Estimate> ultimate_exact;
  double mean_tail_bound = 0.0;
  Estimate ultimate_lower;
  Estimate ultimate_upper;
  PlusSamplingStats sampling;
};

template <EnvSampler M>
WplusResult wplus_and_ultimate_survival(const M& model, std::size_t horizon,
                                        double target_ess, Rng& rng,
                                        const RenewalTable* v = nullptr,
                                        std::uint64_t ceiling = kDefaultCeiling) {
  if (horizon == 0) throw InvalidParameter("wplus: horizon >= 1");
  WplusResult out;
  WeightedAcc alive, exact_acc, lower_acc, upper_acc;
  double tail_sum = 0.0, tail_weight = 0.0;
  bool all_lf = true;
  Rng env_rng = rng.split(1);
  Rng pop_rng = rng.split(2);
  out.sampling = for_each_plus_env(
      model, horizon, target_ess, env_rng,
      [&](const EnvironmentPath& env, double w) {
        PopulationPath pop = simulate_population(env, 1, ceiling, pop_rng);
        const double wm =
            pop.sizes.back() == 0.0
                ? 0.0
                : std::exp(pop.log_sizes.back() - env.sums.back());
        out.w_values.push_back(wm);
        out.w_weights.push_back(w);
        alive.add(w, pop.sizes.back() > 0.0 ? 1.0 : 0.0);
        for (const OffspringLaw& law : env.laws)
          if (law.family() != Family::LinearFractionalGeometric) {
            all_lf = false;
            break;
          }
        if (all_lf) {
          const LfInfiniteSurvival inf = lf_survival_exact_infinite(env, 0);
          exact_acc.add(w, inf.value);
          tail_sum += w * inf.tail_bound;
          tail_weight += w;
        }
        // Bracket: eta-series minorant (truncated at the horizon, capped at
        // 1) and the horizon-m quenched survival as the monotone upper edge.
        double decay = 1.0;
        double denom = 0.0;
        for (std::size_t j = 0; j < env.generations(); ++j) {
          denom += env.laws[j].eta() * decay;
          decay /= env.laws[j].mean();
        }
        lower_acc.add(w, std::min(1.0, 1.0 / denom));
        upper_acc.add(w, survival_given_env(env, 0, 0.0));
      },
      v);
  out.p_w_positive = weighted_mean_estimate(alive, 0.95);
  out.p_w_positive.method = "wplus-positive";
  if (all_lf && exact_acc.n > 0) {
    out.ultimate_exact = weighted_mean_estimate(exact_acc, 0.95);
    out.ultimate_exact->method = "ultimate-lf-exact";
    out.mean_tail_bound = tail_sum / tail_weight;
  }
  out.ultimate_lower = weighted_mean_estimate(lower_acc, 0.95);
  out.ultimate_lower.method = "ultimate-minorant";
  out.ultimate_upper = weighted_mean_estimate(upper_acc, 0.95);
  out.ultimate_upper.method = "ultimate-horizon";
  return out;
}

// ---------------------------------------------------------------------------
// Theta estimators.
// ---------------------------------------------------------------------------

struct ThetaEstimate {
  std::string method;  // "ratio" or "series"
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::uint64_t samples = 0;
  std::size_t n = 0;        // ratio: walk length
  std::size_t terms = 0;    // series: K
  std::size_t horizon = 0;  // series: fresh-environment horizon
  double truncation_diagnostic = 0.0;
  double truncated_value = 0.0;    // series: plain sum over k <= K
  double tail_completion = 0.0;    // series: extrapolated k > K mass
  std::vector<double> term_means;  // series: estimated k-th term, k = 0..K

  bool overlaps(const ThetaEstimate& o) const {
    return ci_low <= o.ci_high && o.ci_low <= ci_high;
  }
};

std::string theta_estimate_json(const ThetaEstimate& t);

// Weighted empirical law as CSV (value, weight); an empty weight span means
// unit weights.
std::string weighted_law_csv(std::span<const double> values,
                             std::span<const double> weights);

// P-hat{Z_n > 0} / P-hat{L_n >= 0} with both legs evaluated on the same
// environment sample: the numerator is the Rao-Blackwellized quenched
// survival, the denominator the indicator of {min(S_1..S_n) >= 0}.
template <EnvSampler M>
ThetaEstimate theta_ratio(const M& model, std::size_t n, std::uint64_t draws,
                          Rng& rng) {
  if (n == 0 || draws == 0)
    throw InvalidParameter("theta_ratio: need n, draws >= 1");
  std::vector<double> num(draws), den(draws);
  std::vector<OffspringLaw> laws;
  laws.reserve(n);
  std::vector<double> xs(n);
  for (std::uint64_t i = 0; i < draws; ++i) {
    laws.clear();
    double s = 0.0, lmin = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      xs[k] = model.sample_increment(rng);
      s += xs[k];
      lmin = std::min(lmin, s);
      laws.push_back(model.law_for(xs[k]));
    }
    double r = 1.0;
    for (std::size_t j = n; j > 0; --j) r = laws[j - 1].survival_map(r);
    num[i] = r;
    den[i] = lmin >= 0.0 ? 1.0 : 0.0;
  }
  const Estimate e = ratio_estimate(num, den, 0.95);
  ThetaEstimate t;
  t.method = "ratio";
  t.value = e.value;
  t.ci_low = e.ci_low;
  t.ci_high = e.ci_high;
  t.samples = draws;
  t.n = n;
  return t;
}

// Series representation: theta = sum_k E[phi(Z_k); tau_k = k], where
// phi(z) = E+[1 - (1 - q(Pi))^z] and q(Pi) is the quenched ultimate-survival
// probability of one individual in a fresh conditioned environment. Exact
// q requires linear-fractional laws. One simulated path contributes
// phi(Z_k) at every strict-new-minimum epoch k <= K (k = 0 included).
//
// The terms decay like k^{-3/2} (each is bounded by E[e^{S_k}; tau_k = k]
// and rho = 1/2 for the symmetric walks here), so the sum truncated at K
// is short of theta by a ~K^{-1/2} tail. The estimate completes the sum
// with the k^{-3/2} extrapolation fitted to the last decade of terms; the
// completion's uncertainty (its own noise plus a 25% exponent allowance)
// is folded into the CI.
template <EnvSampler M>
ThetaEstimate theta_series(const M& model, std::size_t terms,
                           std::size_t horizon, std::uint64_t paths, Rng& rng,
                           double env_ess = 4000.0,
                           const RenewalTable* v = nullptr,
                           std::uint64_t ceiling = kDefaultCeiling) {
  if (terms == 0 || horizon == 0 || paths == 0)
    throw InvalidParameter("theta_series: need terms, horizon, paths >= 1");
  // Phase 1: fresh conditioned environments and their quenched q.
  std::vector<double> env_w, env_log1mq;
  Rng env_rng = rng.split(1);
  for_each_plus_env(
      model, horizon, env_ess, env_rng,
      [&](const EnvironmentPath& env, double w) {
        for (const OffspringLaw& law : env.laws)
          if (law.family() != Family::LinearFractionalGeometric)
            throw WrongFamily(
                "theta_series: exact quenched ultimate survival needs "
                "linear-fractional laws");
        const double q = lf_survival_exact_infinite(env, 0).value;
        env_w.push_back(w);
        env_log1mq.push_back(std::log1p(-q));
      },
      v);
  double wsum = 0.0;
  for (double w : env_w) wsum += w;

  // phi(z) memoized over the integer z values that actually occur.
  std::unordered_map<std::uint64_t, double> phi_cache;
  const auto phi_raw = [&](double z) {
    double acc = 0.0;
    for (std::size_t j = 0; j < env_w.size(); ++j)
      acc += env_w[j] * (-std::expm1(z * env_log1mq[j]));
    return acc / wsum;
  };
  const auto phi = [&](double z) {
    if (z <= 0.0) return 0.0;
    if (z < 1e6 && z == std::floor(z)) {
      const std::uint64_t key = static_cast<std::uint64_t>(z);
      auto it = phi_cache.find(key);
      if (it != phi_cache.end()) return it->second;
      const double val = phi_raw(z);
      phi_cache.emplace(key, val);
      return val;
    }
    return phi_raw(z);
  };

  // Phase 2: plain P paths, one contribution per strict-minimum epoch.
  Rng path_rng = rng.split(2);
  MeanAcc theta_acc;
  MeanAcc late_acc;  // per-path mass over the last decade of k
  const std::size_t decade = std::max<std::size_t>(1, terms / 10);
  std::vector<double> term_sum(terms + 1, 0.0);
  std::unordered_map<std::uint64_t, double> z_counts;  // for the q-error pass
  std::vector<double> big_z;
  for (std::uint64_t i = 0; i < paths; ++i) {
    double total = phi(1.0);  // k = 0: tau_0 = 0, Z_0 = 1
    double late = 0.0;
    term_sum[0] += total;
    z_counts[1] += 1.0;
    PopulationState st;
    double s = 0.0, strict_min = 0.0;
    for (std::size_t k = 1; k <= terms && !st.dead(); ++k) {
      const double x = model.sample_increment(path_rng);
      s += x;
      population_step(st, model.law_for(x), ceiling, path_rng);
      if (s < strict_min) {
        strict_min = s;
        const double z = st.value();
        if (z > 0.0) {
          const double contrib = phi(z);
          total += contrib;
          term_sum[k] += contrib;
          if (k + decade > terms) late += contrib;
          if (z < 1e6 && z == std::floor(z))
            z_counts[static_cast<std::uint64_t>(z)] += 1.0;
          else
            big_z.push_back(z);
        }
      }
    }
    theta_acc.add(total);
    late_acc.add(late);
  }

  ThetaEstimate t;
  t.method = "series";
  t.samples = paths;
  t.terms = terms;
  t.horizon = horizon;
  t.truncated_value = theta_acc.mean;
  t.term_means.resize(terms + 1);
  for (std::size_t k = 0; k <= terms; ++k)
    t.term_means[k] = term_sum[k] / static_cast<double>(paths);

  // Truncation: average per-term contribution over the last decade of k,
  // relative to the truncated sum.
  const double last = late_acc.mean / static_cast<double>(decade);
  t.truncation_diagnostic = last / t.truncated_value;

  // Tail completion: terms ~ c k^{-3/2}; fit c on the last decade and sum
  // the extrapolation over k > K.
  const double kbar =
      static_cast<double>(terms) - 0.5 * static_cast<double>(decade - 1);
  double tail_factor = 0.0;  // sum_{k > K} (k / kbar)^{-3/2} / decade
  const std::size_t far = terms + 100000;
  for (std::size_t k = terms + 1; k <= far; ++k)
    tail_factor += std::pow(static_cast<double>(k), -1.5);
  tail_factor += 2.0 / std::sqrt(static_cast<double>(far) + 0.5);
  tail_factor *= std::pow(kbar, 1.5) / static_cast<double>(decade);
  t.tail_completion = late_acc.mean * tail_factor;
  t.value = t.truncated_value + t.tail_completion;
  const double se_tail = std::sqrt(
      std::pow(late_acc.stderr_mean() * tail_factor, 2) +
      std::pow(0.25 * t.tail_completion, 2));

  // Uncertainty: path sampling plus the shared phi-hat error, linearized via
  // psi_j = sum_z counts(z)/paths * (1 - (1-q_j)^z).
  const double se_paths = theta_acc.stderr_mean();
  double psi_mean = 0.0;
  std::vector<double> psi(env_w.size(), 0.0);
  for (std::size_t j = 0; j < env_w.size(); ++j) {
    double acc = 0.0;
    for (const auto& [z, c] : z_counts)
      acc += c * (-std::expm1(static_cast<double>(z) * env_log1mq[j]));
    for (double z : big_z) acc += -std::expm1(z * env_log1mq[j]);
    psi[j] = acc / static_cast<double>(paths);
    psi_mean += env_w[j] * psi[j];
  }
  psi_mean /= wsum;
  double var_q = 0.0;
  for (std::size_t j = 0; j < env_w.size(); ++j)
    var_q += env_w[j] * env_w[j] * (psi[j] - psi_mean) * (psi[j] - psi_mean);
  const double se_q = std::sqrt(var_q) / wsum;
  const double se =
      std::sqrt(se_paths * se_paths + se_q * se_q + se_tail * se_tail);
  t.ci_low = t.value - 1.959964 * se;
  t.ci_high = t.value + 1.959964 * se;
  if (t.truncation_diagnostic > 0.10)
    throw InsufficientK("theta_series: truncation term above 10% of the sum");
  return t;
}

}  // namespace bpre
