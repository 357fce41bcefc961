#include "bpre/gf.hpp"

#include <cmath>

#include "bpre/errors.hpp"

namespace bpre {

namespace {

void require_range(const EnvironmentPath& env, std::size_t k, double s,
                   bool strict_s) {
  if (k > env.generations())
    throw InvalidParameter("gf: k exceeds environment length");
  if (!(s >= 0.0 && s <= 1.0) || (strict_s && s == 1.0))
    throw InvalidParameter("gf: s out of range");
}

}  // namespace

std::vector<double> survival_profile(const EnvironmentPath& env, std::size_t k,
                                     double s) {
  require_range(env, k, s, /*strict_s=*/false);
  const std::size_t n = env.generations();
  std::vector<double> r(n - k + 1);
  r[n - k] = 1.0 - s;
  for (std::size_t j = n; j > k; --j)
    r[j - 1 - k] = env.laws[j - 1].survival_map(r[j - k]);
  return r;
}

double survival_given_env(const EnvironmentPath& env, std::size_t k, double s) {
  require_range(env, k, s, /*strict_s=*/false);
  double r = 1.0 - s;
  for (std::size_t j = env.generations(); j > k; --j)
    r = env.laws[j - 1].survival_map(r);
  return r;
}

double jirina_residual(const EnvironmentPath& env, std::size_t k, double s) {
  require_range(env, k, s, /*strict_s=*/true);
  const std::size_t n = env.generations();
  if (k >= n) throw InvalidParameter("jirina_residual: need k < n");
  const std::vector<double> r = survival_profile(env, k, s);
  const double lhs = 1.0 / r[0];
  // Running product e^{-(S_j - S_k)} built from the same mean() atoms the
  // recursion uses, so the two sides share their rounding history.
  double decay = 1.0;
  double rhs = 0.0;
  for (std::size_t j = k; j < n; ++j) {
    rhs += env.laws[j].g_survival(r[j + 1 - k]) * decay;
    decay /= env.laws[j].mean();
  }
  rhs += decay / (1.0 - s);
  return std::abs(lhs - rhs) / lhs;
}

double agresti_lower_bound(const EnvironmentPath& env, std::size_t k,
                           double s) {
  require_range(env, k, s, /*strict_s=*/true);
  const std::size_t n = env.generations();
  if (k >= n) throw InvalidParameter("agresti_lower_bound: need k < n");
  double decay = 1.0;
  double denom = 0.0;
  for (std::size_t j = k; j < n; ++j) {
    denom += env.laws[j].eta() * decay;
    decay /= env.laws[j].mean();
  }
  denom += decay / (1.0 - s);
  return 1.0 / denom;
}

namespace {

void require_all_lf(const EnvironmentPath& env) {
  for (const OffspringLaw& law : env.laws)
    if (law.family() != Family::LinearFractionalGeometric)
      throw WrongFamily("lf_survival_exact: non-linear-fractional law present");
}

}  // namespace

double lf_survival_exact(const EnvironmentPath& env, std::size_t k,
                         std::size_t horizon) {
  require_all_lf(env);
  if (k > horizon || horizon > env.generations())
    throw InvalidParameter("lf_survival_exact: need k <= horizon <= n");
  // eta/2 = 1 for every linear-fractional law, so the denominator is the
  // plain sum of e^{-(S_j - S_k)} plus the endpoint term.
  double decay = 1.0;
  double denom = 0.0;
  for (std::size_t j = k; j < horizon; ++j) {
    denom += decay;
    decay /= env.laws[j].mean();
  }
  denom += decay;
  return 1.0 / denom;
}

LfInfiniteSurvival lf_survival_exact_infinite(const EnvironmentPath& env,
                                              std::size_t k) {
  require_all_lf(env);
  const std::size_t n = env.generations();
  if (k > n) throw InvalidParameter("lf_survival_exact_infinite: k > n");
  // Allowance for the unseen continuation: as if it spent this many further
  // steps at the post-truncation minimum level.
  constexpr double kTailAllowanceSteps = 1e4;

  double decay = 1.0;
  double denom = 0.0;
  double max_decay_seen = 1.0;  // e^{-(min_j S_j - S_k)}
  std::size_t j = k;
  for (; j < n; ++j) {
    denom += decay;
    decay /= env.laws[j].mean();
    max_decay_seen = std::max(max_decay_seen, decay);
    // Stop once terms are negligible and S sits at least 10 above its
    // running minimum (decay below e^{-10} times its running maximum).
    if (decay < 1e-16 * denom && decay * 2.2027e4 < max_decay_seen) break;
  }
  LfInfiniteSurvival out;
  out.terms_used = j - k;
  // Remaining within-path terms, exactly.
  double rest = 0.0;
  double rest_decay = decay;
  double post_min_decay = decay;
  for (std::size_t i = j; i < n; ++i) {
    rest += rest_decay;
    rest_decay /= env.laws[i].mean();
    post_min_decay = std::max(post_min_decay, rest_decay);
  }
  const double full = denom + rest;
  out.value = 1.0 / full;
  const double tail_sum_bound = kTailAllowanceSteps * post_min_decay;
  // value - 1/(full + tail) <= tail / full^2
  out.tail_bound = tail_sum_bound / (full * full);
  return out;
}

}  // namespace bpre
