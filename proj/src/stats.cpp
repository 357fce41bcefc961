#include "bpre/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bpre/errors.hpp"

namespace bpre {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw InvalidParameter("normal_quantile: p must lie in (0,1)");
  // Acklam's piecewise rational approximation.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

Estimate wilson_interval(std::uint64_t successes, std::uint64_t trials,
                         double level) {
  if (trials == 0) throw InvalidParameter("wilson_interval: trials must be >= 1");
  if (successes > trials)
    throw InvalidParameter("wilson_interval: successes > trials");
  const double z = normal_quantile(0.5 + level / 2.0);
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (phat + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
  Estimate e;
  e.value = phat;
  e.ci_low = std::max(0.0, center - half);
  e.ci_high = std::min(1.0, center + half);
  e.n = trials;
  e.method = "wilson";
  return e;
}

void MeanAcc::merge(const MeanAcc& o) {
  if (o.n == 0) return;
  if (n == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
  const double d = o.mean - mean;
  const double nt = na + nb;
  mean += d * nb / nt;
  m2 += o.m2 + d * d * na * nb / nt;
  n += o.n;
}

double MeanAcc::stderr_mean() const {
  if (n < 2) return 0.0;
  return std::sqrt(variance() / static_cast<double>(n));
}

MeanAcc merge_accumulators(std::span<const MeanAcc> parts) {
  // Pairwise tree so the reduction does not depend on scheduling.
  std::vector<MeanAcc> level(parts.begin(), parts.end());
  while (level.size() > 1) {
    std::vector<MeanAcc> next;
    next.reserve((level.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
      MeanAcc m = level[i];
      m.merge(level[i + 1]);
      next.push_back(m);
    }
    if (level.size() % 2 == 1) next.push_back(level.back());
    level = std::move(next);
  }
  return level.empty() ? MeanAcc{} : level.front();
}

Estimate mean_estimate(const MeanAcc& acc, double level) {
  if (acc.n == 0) throw DegenerateSample("mean_estimate: empty sample");
  const double z = normal_quantile(0.5 + level / 2.0);
  Estimate e;
  e.value = acc.mean;
  const double se = acc.stderr_mean();
  e.ci_low = acc.mean - z * se;
  e.ci_high = acc.mean + z * se;
  e.n = acc.n;
  e.method = "mean-normal";
  return e;
}

Estimate weighted_mean_estimate(const WeightedAcc& acc, double level) {
  if (acc.w <= 0.0)
    throw DegenerateSample("weighted_mean_estimate: zero total weight");
  const double mean = acc.wy / acc.w;
  // Var of the ratio estimator via linearization on weighted residuals.
  const double neff = acc.effective_n();
  const double var_y = std::max(0.0, acc.wy2 / acc.w - mean * mean);
  const double se = neff > 1.0 ? std::sqrt(var_y / neff) : 0.0;
  const double z = normal_quantile(0.5 + level / 2.0);
  Estimate e;
  e.value = mean;
  e.ci_low = mean - z * se;
  e.ci_high = mean + z * se;
  e.n = acc.n;
  e.method = "weighted-mean";
  return e;
}

namespace {

struct WeightedPoint {
  double x;
  double w;
  int which;  // 0 = sample a, 1 = sample b
};

}  // namespace

KsResult ks_two_sample(std::span<const double> a, std::span<const double> wa,
                       std::span<const double> b, std::span<const double> wb,
                       double alpha) {
  if (a.empty() || b.empty())
    throw InvalidParameter("ks_two_sample: empty sample");
  if (!wa.empty() && wa.size() != a.size())
    throw InvalidParameter("ks_two_sample: weight size mismatch");
  if (!wb.empty() && wb.size() != b.size())
    throw InvalidParameter("ks_two_sample: weight size mismatch");

  std::vector<WeightedPoint> pts;
  pts.reserve(a.size() + b.size());
  double wsum_a = 0.0, w2sum_a = 0.0, wsum_b = 0.0, w2sum_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double w = wa.empty() ? 1.0 : wa[i];
    if (w < 0.0) throw InvalidParameter("ks_two_sample: negative weight");
    if (w == 0.0) continue;
    pts.push_back({a[i], w, 0});
    wsum_a += w;
    w2sum_a += w * w;
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double w = wb.empty() ? 1.0 : wb[i];
    if (w < 0.0) throw InvalidParameter("ks_two_sample: negative weight");
    if (w == 0.0) continue;
    pts.push_back({b[i], w, 1});
    wsum_b += w;
    w2sum_b += w * w;
  }
  if (wsum_a <= 0.0 || wsum_b <= 0.0)
    throw DegenerateSample("ks_two_sample: zero total weight");

  std::sort(pts.begin(), pts.end(),
            [](const WeightedPoint& l, const WeightedPoint& r) {
              return l.x < r.x;
            });

  double ca = 0.0, cb = 0.0, d = 0.0;
  std::size_t i = 0;
  while (i < pts.size()) {
    // Advance through ties in x across both samples before comparing.
    const double x = pts[i].x;
    while (i < pts.size() && pts[i].x == x) {
      if (pts[i].which == 0)
        ca += pts[i].w;
      else
        cb += pts[i].w;
      ++i;
    }
    d = std::max(d, std::abs(ca / wsum_a - cb / wsum_b));
  }

  KsResult r;
  r.statistic = d;
  r.n_eff_a = wsum_a * wsum_a / w2sum_a;
  r.n_eff_b = wsum_b * wsum_b / w2sum_b;
  const double calpha = std::sqrt(-std::log(alpha / 2.0) / 2.0);
  r.threshold =
      calpha * std::sqrt((r.n_eff_a + r.n_eff_b) / (r.n_eff_a * r.n_eff_b));
  const double ne = r.n_eff_a * r.n_eff_b / (r.n_eff_a + r.n_eff_b);
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = 2.0 * ((j % 2 == 1) ? 1.0 : -1.0) *
                        std::exp(-2.0 * j * j * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-12) break;
  }
  r.p_value = std::clamp(p, 0.0, 1.0);
  return r;
}

SlopeFit loglog_slope(std::span<const double> n, std::span<const double> y) {
  if (n.size() != y.size() || n.size() < 3)
    throw InvalidParameter("loglog_slope: need >= 3 points");
  std::vector<double> lx(n.size()), ly(y.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(n[i] > 0.0) || !(y[i] > 0.0))
      throw InvalidParameter("loglog_slope: nonpositive input");
    lx[i] = std::log(n[i]);
    ly[i] = std::log(y[i]);
  }
  for (std::size_t i = 1; i < lx.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (lx[i] == lx[j])
        throw InvalidParameter("loglog_slope: duplicate abscissa");
  const double m = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / m;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  SlopeFit fit;
  fit.slope = sxy / sxx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double pred = my + fit.slope * (lx[i] - mx);
    ss_res += (ly[i] - pred) * (ly[i] - pred);
  }
  fit.stderr_slope =
      m > 2.0 ? std::sqrt(ss_res / (m - 2.0) / sxx) : 0.0;
  return fit;
}

Estimate ratio_estimate(std::span<const double> num,
                        std::span<const double> den, double level) {
  if (num.size() != den.size() || num.empty())
    throw InvalidParameter("ratio_estimate: paired samples required");
  const double n = static_cast<double>(num.size());
  double mn = 0.0, md = 0.0;
  for (std::size_t i = 0; i < num.size(); ++i) {
    mn += num[i];
    md += den[i];
  }
  mn /= n;
  md /= n;
  double vn = 0.0, vd = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < num.size(); ++i) {
    vn += (num[i] - mn) * (num[i] - mn);
    vd += (den[i] - md) * (den[i] - md);
    cov += (num[i] - mn) * (den[i] - md);
  }
  vn /= n - 1.0;
  vd /= n - 1.0;
  cov /= n - 1.0;
  const double sed = std::sqrt(vd / n);
  if (md - 4.0 * sed <= 0.0)
    throw DegenerateSample("ratio_estimate: denominator CI contains 0");
  const double r = mn / md;
  const double var_r =
      (vn - 2.0 * r * cov + r * r * vd) / (md * md) / n;
  const double z = normal_quantile(0.5 + level / 2.0);
  Estimate e;
  e.value = r;
  const double se = std::sqrt(std::max(0.0, var_r));
  e.ci_low = r - z * se;
  e.ci_high = r + z * se;
  e.n = num.size();
  e.method = "ratio-delta";
  return e;
}

Estimate bootstrap_ratio_estimate(std::span<const double> num,
                                  std::span<const double> den, double level,
                                  std::size_t resamples, Rng& rng) {
  if (num.size() != den.size() || num.empty())
    throw InvalidParameter("bootstrap_ratio_estimate: paired samples required");
  const std::size_t n = num.size();
  std::vector<double> ratios;
  ratios.reserve(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    double sn = 0.0, sd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_u64() % n);
      sn += num[j];
      sd += den[j];
    }
    if (sd > 0.0) ratios.push_back(sn / sd);
  }
  if (ratios.size() < resamples / 2)
    throw DegenerateSample("bootstrap_ratio_estimate: denominator degenerate");
  double sn = 0.0, sd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sn += num[i];
    sd += den[i];
  }
  Estimate e;
  e.value = sn / sd;
  e.ci_low = quantile(ratios, (1.0 - level) / 2.0);
  e.ci_high = quantile(ratios, 0.5 + level / 2.0);
  e.n = n;
  e.method = "ratio-bootstrap";
  return e;
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidParameter("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

double correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw InvalidParameter("correlation: paired samples required");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace bpre
