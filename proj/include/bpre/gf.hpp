#pragma once

#include <cstddef>
#include <vector>

#include "bpre/offspring.hpp"

namespace bpre {

// Quenched survival machinery built on the composition
// f_{k,n}(s) = f_{k+1}(f_{k+2}(...f_n(s)...)). Everything here works in
// survival coordinates r = 1 - s: r underflows gracefully where extinction
// probabilities would saturate at 1.

// r_j = 1 - f_{j,n}(s) for j = k..n, one backward sweep; result[j-k] = r_j,
// result.back() = 1 - s.
std::vector<double> survival_profile(const EnvironmentPath& env, std::size_t k,
                                     double s);

// 1 - f_{k,n}(s); equals the survival probability of one generation-k
// individual at generation n when s = 0.
double survival_given_env(const EnvironmentPath& env, std::size_t k, double s);

// Both-sides evaluation of the composition identity
//   1/(1 - f_{k,n}(s)) = e^{-(S_n-S_k)}/(1-s)
//                        + sum_j g_{j+1}(f_{j+1,n}(s)) e^{-(S_j-S_k)},
// returned as the relative discrepancy |LHS - RHS| / LHS.
double jirina_residual(const EnvironmentPath& env, std::size_t k, double s);

// Survival lower bound from the eta-majorized denominator:
//   (e^{-(S_n-S_k)}/(1-s) + sum_j eta_{j+1} e^{-(S_j-S_k)})^{-1}.
double agresti_lower_bound(const EnvironmentPath& env, std::size_t k, double s);

// Exact survival for all-linear-fractional environments, where g is the
// constant eta/2 and the composition identity closes:
//   (e^{-(S_n-S_k)} + sum_{j=k}^{n-1} (eta_{j+1}/2) e^{-(S_j-S_k)})^{-1}.
double lf_survival_exact(const EnvironmentPath& env, std::size_t k,
                         std::size_t horizon);

// Infinite-horizon form (sum_{j>=k} (eta_{j+1}/2) e^{-(S_j-S_k)})^{-1},
// truncated along the given path once terms stop mattering; tail_bound bounds
// the amount the value could still shrink if the path continued at or above
// its post-truncation minimum.
struct LfInfiniteSurvival {
  double value = 0.0;
  double tail_bound = 0.0;
  std::size_t terms_used = 0;
};
LfInfiniteSurvival lf_survival_exact_infinite(const EnvironmentPath& env,
                                              std::size_t k);

}  // namespace bpre
