#include "bpre/walk.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace bpre {

FluctuationSummary fluctuation_summary(std::span<const double> s) {
  if (s.empty()) throw InvalidParameter("fluctuation_summary: empty path");
  if (s[0] != 0.0)
    throw InvalidParameter("fluctuation_summary: S_0 must be 0");
  FluctuationSummary out;
  const std::size_t n = s.size() - 1;
  out.min_excluding_start =
      n == 0 ? std::numeric_limits<double>::infinity() : s[1];
  double min_all = 0.0;
  out.tau = 0;
  double strict_min = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (s[i] < min_all) {
      min_all = s[i];
      out.tau = i;  // first attainment: strict improvement only
    }
    if (i >= 2) out.min_excluding_start = std::min(out.min_excluding_start, s[i]);
    if (s[i] < strict_min) {
      strict_min = s[i];
      out.ladder_epochs.push_back(i);
      out.ladder_heights.push_back(s[i]);
    }
    if (!out.first_weak_ascending && s[i] >= 0.0) {
      out.first_weak_ascending = i;
      out.first_weak_ascending_height = s[i];
    }
  }
  return out;
}

ProspectiveMinima prospective_minima(std::span<const double> s,
                                     std::size_t lookahead) {
  if (s.empty()) throw InvalidParameter("prospective_minima: empty path");
  if (lookahead == 0)
    throw InvalidParameter("prospective_minima: lookahead must be >= 1");
  const std::size_t n = s.size() - 1;
  ProspectiveMinima out;
  // Monotone deque over the window [m+1, min(m+lookahead, n)]; front is the
  // argmin of the window.
  std::deque<std::size_t> window;
  const std::size_t init_hi = std::min(lookahead, n);
  for (std::size_t j = 1; j <= init_hi; ++j) {
    while (!window.empty() && s[window.back()] >= s[j]) window.pop_back();
    window.push_back(j);
  }
  for (std::size_t m = 1; m <= n; ++m) {
    if (m + lookahead <= n) {
      const std::size_t j = m + lookahead;
      while (!window.empty() && s[window.back()] >= s[j]) window.pop_back();
      window.push_back(j);
    }
    while (!window.empty() && window.front() <= m) window.pop_front();
    const bool ok = window.empty() || s[window.front()] >= s[m];
    if (ok) {
      out.indices.push_back(m);
      out.censored.push_back(n - m < lookahead ? 1 : 0);
    }
  }
  return out;
}

double RenewalTable::value(double x) const {
  if (x < 0.0) return 0.0;
  if (exact && exact_step) {
    // Nudge absorbs float drift of partial sums built from +-step increments.
    return std::floor(x / *exact_step + 1e-9) + 1.0;
  }
  if (x <= grid.front()) return v_hat.front();
  if (x >= grid.back())
    return v_hat.back() + slope * (x - grid.back());
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
  const double t = (x - grid[hi - 1]) / (grid[hi] - grid[hi - 1]);
  return v_hat[hi - 1] * (1.0 - t) + v_hat[hi] * t;
}

double RenewalTable::stderr_at(double x) const {
  if (exact || x < 0.0) return 0.0;
  if (x <= grid.front()) return stderr_v.front();
  if (x >= grid.back()) return stderr_v.back();
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
  return std::max(stderr_v[hi - 1], stderr_v[hi]);
}

std::string RenewalTable::to_csv() const {
  std::string out = "x,v_hat,stderr,exact_flag\n";
  char buf[96];
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d\n", grid[g], v_hat[g],
                  exact ? 0.0 : stderr_v[g], exact ? 1 : 0);
    out += buf;
  }
  return out;
}

RenewalTable make_exact_two_point_renewal(double step,
                                          std::vector<double> grid) {
  detail::validate_renewal_grid(grid);
  if (!(step > 0.0))
    throw InvalidParameter("renewal: two-point step must be positive");
  RenewalTable table;
  table.exact = true;
  table.exact_step = step;
  table.grid = std::move(grid);
  table.slope = 1.0 / step;
  table.v_hat.reserve(table.grid.size());
  table.stderr_v.assign(table.grid.size(), 0.0);
  for (double x : table.grid)
    table.v_hat.push_back(std::floor(x / step + 1e-9) + 1.0);
  return table;
}

RenewalTable estimate_renewal_v(const EnvironmentModel& model,
                                std::vector<double> grid, std::uint64_t walks,
                                Rng& rng, const RenewalOptions& opt) {
  if (const auto step = model.exact_renewal_step())
    return make_exact_two_point_renewal(*step, std::move(grid));
  return estimate_renewal_v_mc(model, std::move(grid), walks, rng, opt);
}

Estimate check_harmonicity(const RenewalTable& table,
                           const EnvironmentModel& model, double x,
                           std::uint64_t draws, Rng& rng) {
  if (x < 0.0) throw InvalidParameter("check_harmonicity: x must be >= 0");
  Estimate e;
  e.rng = {rng.seed_id(), rng.stream_id()};
  const double vx = table.value(x);
  if (model.increment().kind == IncrementKind::TwoPoint) {
    const double c = model.increment().param;
    e.value = 0.5 * (table.value(x + c) + table.value(x - c)) - vx;
    const double se =
        0.5 * (table.stderr_at(x + c) + table.stderr_at(x - c)) +
        table.stderr_at(x);
    e.ci_low = e.value - 1.959964 * se;
    e.ci_high = e.value + 1.959964 * se;
    e.n = 1;
    e.method = "harmonicity-two-atom";
    return e;
  }
  MeanAcc acc;
  double table_se = 0.0;
  for (std::uint64_t i = 0; i < draws; ++i) {
    const double y = x + model.sample_increment(rng);
    acc.add(table.value(y));
    table_se += table.stderr_at(y);
  }
  table_se /= static_cast<double>(draws);
  e.value = acc.mean - vx;
  // Table errors are common across draws: add them linearly.
  const double se = acc.stderr_mean() + table_se + table.stderr_at(x);
  e.ci_low = e.value - 1.959964 * se;
  e.ci_high = e.value + 1.959964 * se;
  e.n = draws;
  e.method = "harmonicity-mc";
  return e;
}

SlowlyVaryingL slowly_varying_l(std::span<const double> p_nonneg, double rho,
                                std::size_t n) {
  if (!(rho > 0.0 && rho < 1.0))
    throw InvalidParameter("slowly_varying_l: rho must lie in (0,1)");
  if (n < 1) throw InvalidParameter("slowly_varying_l: n must be >= 1");
  if (p_nonneg.empty())
    throw InvalidParameter("slowly_varying_l: no probabilities given");
  const std::size_t horizon = p_nonneg.size();
  const double s = 1.0 - 1.0 / static_cast<double>(n);
  double expo = 0.0;
  double spow = 1.0;
  for (std::size_t m = 1; m <= horizon; ++m) {
    spow *= s;
    expo += spow / static_cast<double>(m) * (p_nonneg[m - 1] - rho);
  }
  SlowlyVaryingL out;
  out.value = std::exp(expo) / std::tgamma(rho);
  // Tail bound: max |P - rho| beyond horizon/2 times the geometric remainder
  // sum_{m > M} s^m / m <= s^M / ((1-s) M) = s^M n / M.
  double max_resid = 0.0;
  for (std::size_t m = horizon / 2; m < horizon; ++m)
    max_resid = std::max(max_resid, std::abs(p_nonneg[m] - rho));
  const double geo = std::pow(s, static_cast<double>(horizon)) *
                     static_cast<double>(n) / static_cast<double>(horizon);
  out.rel_truncation_bound = std::expm1(max_resid * geo);
  if (out.rel_truncation_bound > 0.1)
    throw InsufficientHorizon(
        "slowly_varying_l: truncation bound exceeds 10% of the result");
  return out;
}

double two_point_prob_nonneg(std::size_t m) {
  if (m == 0) return 1.0;
  if (m % 2 == 1) return 0.5;  // no mass at 0 for odd m
  // P{S_{2j} >= 0} = 1/2 + C(2j, j) 2^{-2j-1}
  const std::size_t j = m / 2;
  double central = 1.0;  // C(2j, j) 4^{-j}
  for (std::size_t i = 1; i <= j; ++i)
    central *= (2.0 * static_cast<double>(i) - 1.0) / (2.0 * static_cast<double>(i));
  return 0.5 + 0.5 * central;
}

double two_point_prob_min_nonneg(std::size_t m) {
  if (m == 0) return 1.0;
  // P{L_m >= 0} = C(m, floor(m/2)) 2^{-m}
  const std::size_t j = m / 2;
  double central = 1.0;  // C(2j, j) 4^{-j}
  for (std::size_t i = 1; i <= j; ++i)
    central *= (2.0 * static_cast<double>(i) - 1.0) / (2.0 * static_cast<double>(i));
  if (m % 2 == 0) return central;
  return central * (2.0 * static_cast<double>(j) + 1.0) /
         (static_cast<double>(j) + 1.0) * 0.5;
}

}  // namespace bpre
