#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "bpre/errors.hpp"
#include "bpre/offspring.hpp"
#include "bpre/stats.hpp"

namespace bpre {

// Fluctuation statistics of one realized walk S_0 = 0, S_1, ..., S_n.
struct FluctuationSummary {
  // min(S_1..S_n); +infinity when n = 0.
  double min_excluding_start = 0.0;
  // First index attaining min(S_0..S_n); ties resolve to the smallest index.
  std::size_t tau = 0;
  // Strict descending ladder epochs gamma_1 < gamma_2 < ... and their heights.
  std::vector<std::size_t> ladder_epochs;
  std::vector<double> ladder_heights;
  // First weak ascending ladder epoch: least m >= 1 with S_m >= 0.
  std::optional<std::size_t> first_weak_ascending;
  double first_weak_ascending_height = 0.0;

  double min_including_start() const {
    return std::min(0.0, min_excluding_start);
  }
};

// Requires S[0] == 0; throws on an empty path.
FluctuationSummary fluctuation_summary(std::span<const double> s);

// Times m >= 1 whose value is never undercut within the next `lookahead`
// steps: S_{m+i} >= S_m for 1 <= i <= min(lookahead, n-m). An index is
// censored when fewer than `lookahead` future steps were available, i.e. the
// infinite-future condition was only partially checked.
struct ProspectiveMinima {
  std::vector<std::size_t> indices;
  std::vector<char> censored;
};
ProspectiveMinima prospective_minima(std::span<const double> s,
                                     std::size_t lookahead);

// Gridded estimate of the renewal function
//   v(x) = 1 + sum_i P{S_{gamma_i} >= -x}   (x >= 0; v = 0 for x < 0),
// with linear extrapolation beyond the grid. When the walk is TwoPoint(+-c)
// every ladder height is an exact multiple of -c and v(x) = floor(x/c) + 1.
struct RenewalTable {
  std::vector<double> grid;
  std::vector<double> v_hat;
  std::vector<double> stderr_v;
  double slope = 1.0;  // used beyond grid.back()
  bool exact = false;
  std::optional<double> exact_step;
  double censored_fraction = 0.0;
  std::uint64_t walks = 0;

  double value(double x) const;
  double stderr_at(double x) const;
  std::string to_csv() const;  // columns: x, v_hat, stderr, exact_flag
};

struct RenewalOptions {
  // A walk is stopped (and its deepest grid points censored) after this many
  // steps; symmetric walks have heavy-tailed ladder waiting times, so a hard
  // cap is unavoidable. The censored fraction is recorded in the table.
  std::uint64_t max_steps_per_walk = 1000000;
  // Above this censoring rate the estimate is considered broken.
  double max_censored_fraction = 0.02;
};

RenewalTable make_exact_two_point_renewal(double step, std::vector<double> grid);

namespace detail {

inline void validate_renewal_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw InvalidParameter("renewal: empty grid");
  if (grid.front() < 0.0) throw InvalidParameter("renewal: grid must be >= 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1])
      throw InvalidParameter("renewal: grid must be strictly increasing");
}

inline void finish_renewal_table(RenewalTable& table,
                                 const std::vector<MeanAcc>& acc,
                                 std::uint64_t censored, std::uint64_t walks,
                                 double max_censored_fraction) {
  table.walks = walks;
  table.censored_fraction =
      static_cast<double>(censored) / static_cast<double>(walks);
  table.v_hat.resize(table.grid.size());
  table.stderr_v.resize(table.grid.size());
  for (std::size_t g = 0; g < table.grid.size(); ++g) {
    table.v_hat[g] = acc[g].mean;
    table.stderr_v[g] = acc[g].stderr_mean();
  }
  // Last-decade least-squares slope for extrapolation; v(x) = O(x).
  const double span = table.grid.back() - table.grid.front();
  std::size_t lo = table.grid.size() - 1;
  while (lo > 0 && table.grid.back() - table.grid[lo - 1] <= 0.1 * span) --lo;
  if (lo + 2 > table.grid.size()) lo = table.grid.size() - 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
  for (std::size_t g = lo; g < table.grid.size(); ++g) {
    sx += table.grid[g];
    sy += table.v_hat[g];
    sxx += table.grid[g] * table.grid[g];
    sxy += table.grid[g] * table.v_hat[g];
    m += 1.0;
  }
  const double det = m * sxx - sx * sx;
  table.slope = det > 0.0 ? (m * sxy - sx * sy) / det : 1.0;
  if (table.censored_fraction > max_censored_fraction)
    throw BudgetExceeded(
        "renewal: too many walks hit the per-walk step cap before the ladder "
        "passed the grid",
        walks, table.v_hat.back());
}

}  // namespace detail

// Ladder-route Monte Carlo: each walk runs until its cumulative ladder depth
// passes grid.back() (or the step cap), contributing 1 + #{strict descending
// ladder heights >= -x} at every grid x.
template <WalkSampler M>
RenewalTable estimate_renewal_v_mc(const M& model, std::vector<double> grid,
                                   std::uint64_t walks, Rng& rng,
                                   const RenewalOptions& opt = {}) {
  detail::validate_renewal_grid(grid);
  if (walks == 0) throw InvalidParameter("renewal: need walks >= 1");
  RenewalTable table;
  table.grid = std::move(grid);
  const std::size_t G = table.grid.size();
  const double deepest = table.grid.back();
  std::vector<MeanAcc> acc(G);
  std::vector<std::uint32_t> bucket(G);
  std::uint64_t censored = 0;
  for (std::uint64_t i = 0; i < walks; ++i) {
    std::fill(bucket.begin(), bucket.end(), 0u);
    double s = 0.0;
    double run_min = 0.0;
    std::size_t g = 0;  // first grid index with grid[g] >= -s at the last ladder point
    bool capped = true;
    for (std::uint64_t step = 0; step < opt.max_steps_per_walk; ++step) {
      s += model.sample_increment(rng);
      if (s < run_min) {
        run_min = s;
        if (s < -deepest) {
          capped = false;
          break;
        }
        while (table.grid[g] < -s) ++g;  // heights only descend
        ++bucket[g];
      }
    }
    if (capped) ++censored;
    std::uint32_t cum = 1;  // the "1 +" of the definition
    for (std::size_t gg = 0; gg < G; ++gg) {
      cum += bucket[gg];
      acc[gg].add(static_cast<double>(cum));
    }
  }
  detail::finish_renewal_table(table, acc, censored, walks,
                               opt.max_censored_fraction);
  return table;
}

// Identity (2.5) route: v(x) = sum_k P{-S_k <= x, tau_k = k}. Per path this
// counts the epochs where S sits at a strict new minimum of S_0..S_k (k = 0
// included), which is finalized once the walk drops below -grid.back().
template <WalkSampler M>
RenewalTable estimate_renewal_v_tau(const M& model, std::vector<double> grid,
                                    std::uint64_t walks, Rng& rng,
                                    const RenewalOptions& opt = {}) {
  detail::validate_renewal_grid(grid);
  if (walks == 0) throw InvalidParameter("renewal: need walks >= 1");
  RenewalTable table;
  table.grid = std::move(grid);
  const std::size_t G = table.grid.size();
  const double deepest = table.grid.back();
  std::vector<MeanAcc> acc(G);
  std::vector<std::uint32_t> count(G);
  std::uint64_t censored = 0;
  for (std::uint64_t i = 0; i < walks; ++i) {
    std::fill(count.begin(), count.end(), 1u);  // k = 0 term: -S_0 <= x always
    double s = 0.0;
    double strict_min = 0.0;
    bool capped = true;
    for (std::uint64_t step = 0; step < opt.max_steps_per_walk; ++step) {
      s += model.sample_increment(rng);
      if (s < strict_min) {  // tau_k = k exactly here
        strict_min = s;
        if (s < -deepest) {
          capped = false;
          break;
        }
        const auto it = std::lower_bound(table.grid.begin(), table.grid.end(),
                                         -s);
        for (std::size_t gg = static_cast<std::size_t>(it - table.grid.begin());
             gg < G; ++gg)
          ++count[gg];
      }
    }
    if (capped) ++censored;
    for (std::size_t gg = 0; gg < G; ++gg)
      acc[gg].add(static_cast<double>(count[gg]));
  }
  detail::finish_renewal_table(table, acc, censored, walks,
                               opt.max_censored_fraction);
  return table;
}

// Model-level entry point: exact closed form for TwoPoint walks, Monte Carlo
// otherwise.
RenewalTable estimate_renewal_v(const EnvironmentModel& model,
                                std::vector<double> grid, std::uint64_t walks,
                                Rng& rng, const RenewalOptions& opt = {});

// Monte Carlo residual of the harmonicity identity E v(x + X) = v(x). For
// TwoPoint increments the two-atom expectation is evaluated exactly instead
// of sampled. The CI folds in the table's standard errors (conservatively,
// as perfectly correlated).
Estimate check_harmonicity(const RenewalTable& table,
                           const EnvironmentModel& model, double x,
                           std::uint64_t draws, Rng& rng);

struct SpitzerEstimate {
  double rho_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> per_m;  // P-hat{S_m > 0}, m = 1..n
  std::size_t n = 0;
  std::uint64_t walks = 0;
};

// Cesaro average (1/n) sum_m P-hat{S_m > 0} over `walks` independent paths.
template <WalkSampler M>
SpitzerEstimate estimate_rho(const M& model, std::size_t n,
                             std::uint64_t walks, Rng& rng) {
  if (n == 0 || walks == 0)
    throw InvalidParameter("estimate_rho: need n, walks >= 1");
  SpitzerEstimate out;
  out.n = n;
  out.walks = walks;
  out.per_m.assign(n, 0.0);
  MeanAcc acc;
  for (std::uint64_t i = 0; i < walks; ++i) {
    double s = 0.0;
    std::size_t above = 0;
    for (std::size_t m = 0; m < n; ++m) {
      s += model.sample_increment(rng);
      if (s > 0.0) {
        ++above;
        out.per_m[m] += 1.0;
      }
    }
    acc.add(static_cast<double>(above) / static_cast<double>(n));
  }
  for (double& p : out.per_m) p /= static_cast<double>(walks);
  const Estimate e = mean_estimate(acc, 0.95);
  out.rho_hat = e.value;
  out.ci_low = e.ci_low;
  out.ci_high = e.ci_high;
  return out;
}

// l(n) = h(1 - 1/n) / Gamma(rho) with
// h(s) = exp(sum_m s^m/m (P{S_m >= 0} - rho)), truncated at the given
// probabilities' horizon M. rel_truncation_bound bounds the relative error
// from the discarded tail: geometric remainder of s^m/m times the largest
// |P - rho| observed beyond M/2. Throws InsufficientHorizon when that bound
// exceeds 10% of the result.
struct SlowlyVaryingL {
  double value = 0.0;
  double rel_truncation_bound = 0.0;
};
SlowlyVaryingL slowly_varying_l(std::span<const double> p_nonneg, double rho,
                                std::size_t n);

// Exact lattice-walk probabilities for increments +-1 (used as closed-form
// baselines for the TwoPoint model): P{S_m >= 0} and P{min(S_1..S_m) >= 0}.
double two_point_prob_nonneg(std::size_t m);
double two_point_prob_min_nonneg(std::size_t m);

}  // namespace bpre
