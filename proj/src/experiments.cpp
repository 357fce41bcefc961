#include "bpre/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <thread>

#include "bpre/branching.hpp"
#include "bpre/conditioned.hpp"
#include "bpre/gf.hpp"
#include "bpre/io.hpp"
#include "bpre/stats.hpp"
#include "bpre/walk.hpp"
#include "json.hpp"

namespace bpre {

namespace {

using nlohmann::ordered_json;

constexpr double kLog2 = 0.6931471805599453;

void run_tasks(std::vector<std::function<void()>>& tasks, int threads) {
  if (threads <= 1 || tasks.size() <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  const int workers = std::min<int>(threads, static_cast<int>(tasks.size()));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int i = 0; i < workers; ++i)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t j = next.fetch_add(1);
        if (j >= tasks.size()) break;
        tasks[j]();
      }
    });
  for (auto& th : pool) th.join();
}

struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;
  std::vector<CheckResult> verdicts;
  ordered_json summary;

  void add_file(std::string name, std::string content) {
    files.emplace_back(std::move(name), std::move(content));
  }
  void verdict(const std::string& name, bool pass, double value, double bound,
               std::string detail = {}) {
    verdicts.push_back({name, pass, value, bound, std::move(detail)});
  }
};

ordered_json estimate_json(const Estimate& e) {
  return ordered_json{{"value", e.value},
                      {"ci_low", e.ci_low},
                      {"ci_high", e.ci_high},
                      {"n", e.n},
                      {"method", e.method}};
}

// Rao-Blackwellized survival, the {L_n >= 0} leg and their ratio, all from
// one environment sample.
struct SurvivalRatioLegs {
  Estimate survival;
  Estimate min_nonneg;
  Estimate ratio;
};

SurvivalRatioLegs survival_ratio_legs(const EnvironmentModel& model,
                                      std::size_t n, std::uint64_t draws,
                                      Rng rng) {
  std::vector<double> num(draws), den(draws);
  std::vector<OffspringLaw> laws;
  laws.reserve(n);
  MeanAcc acc;
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < draws; ++i) {
    laws.clear();
    double s = 0.0, lmin = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double x = model.sample_increment(rng);
      s += x;
      lmin = std::min(lmin, s);
      laws.push_back(model.law_for(x));
    }
    double r = 1.0;
    for (std::size_t j = n; j > 0; --j) r = laws[j - 1].survival_map(r);
    num[i] = r;
    den[i] = lmin >= 0.0 ? 1.0 : 0.0;
    acc.add(r);
    if (lmin >= 0.0) ++hits;
  }
  SurvivalRatioLegs out;
  out.survival = mean_estimate(acc, 0.95);
  out.survival.method = "survival-rao-blackwell";
  out.min_nonneg = wilson_interval(hits, draws, 0.95);
  out.ratio = ratio_estimate(num, den, 0.95);
  return out;
}

// ---------------------------------------------------------------------------
// survival-asymptotics: theta ratio across n plus the log-log slope.
// ---------------------------------------------------------------------------
void run_survival_asymptotics(const ExperimentConfig& cfg, Outputs& out) {
  const std::size_t count = cfg.n_list.size();
  std::vector<SurvivalRatioLegs> rows(count);
  Rng root(cfg.seed, 17);
  std::vector<std::function<void()>> tasks;
  for (std::size_t i = 0; i < count; ++i)
    tasks.push_back([&, i] {
      rows[i] = survival_ratio_legs(cfg.model, cfg.n_list[i], cfg.samples,
                                    root.split(i));
    });
  run_tasks(tasks, cfg.threads);

  CsvWriter csv({"n", "p_surv", "p_surv_lo", "p_surv_hi", "p_min_nonneg",
                 "p_min_lo", "p_min_hi", "ratio", "ratio_lo", "ratio_hi"});
  std::vector<double> ns, ps, ratios;
  for (std::size_t i = 0; i < count; ++i) {
    const SurvivalRatioLegs& r = rows[i];
    csv.add_row(std::vector<double>{
        static_cast<double>(cfg.n_list[i]), r.survival.value,
        r.survival.ci_low, r.survival.ci_high, r.min_nonneg.value,
        r.min_nonneg.ci_low, r.min_nonneg.ci_high, r.ratio.value,
        r.ratio.ci_low, r.ratio.ci_high});
    ns.push_back(static_cast<double>(cfg.n_list[i]));
    ps.push_back(r.survival.value);
    ratios.push_back(r.ratio.value);
  }
  out.add_file("survival_asymptotics.csv", csv.text());

  const double rmax = *std::max_element(ratios.begin(), ratios.end());
  const double rmin = *std::min_element(ratios.begin(), ratios.end());
  out.verdict("theta-ratio-stable", rmax / rmin < 1.15, rmax / rmin, 1.15,
              "max/min of P{Z_n>0}/P{L_n>=0} over n");
  const SlopeFit fit = loglog_slope(ns, ps);
  out.verdict("survival-slope", std::abs(fit.slope + 0.5) <= 0.08, fit.slope,
              -0.5, "log-log slope of P{Z_n>0}, target -1/2 +- 0.08");
  out.summary["rows"] = ordered_json::array();
  for (std::size_t i = 0; i < count; ++i) {
    out.summary["rows"].push_back(
        ordered_json{{"n", cfg.n_list[i]},
                     {"survival", estimate_json(rows[i].survival)},
                     {"min_nonneg", estimate_json(rows[i].min_nonneg)},
                     {"ratio", estimate_json(rows[i].ratio)}});
  }
  out.summary["slope"] = fit.slope;
  out.summary["slope_stderr"] = fit.stderr_slope;

  if (cfg.svg) {
    SvgSeries surv{"P{Z_n>0}", ns, ps};
    SvgSeries ln{"P{L_n>=0}", ns, {}};
    for (const SurvivalRatioLegs& r : rows) ln.y.push_back(r.min_nonneg.value);
    out.add_file("survival_asymptotics.svg",
                 svg_line_plot("Survival asymptotics", {surv, ln}, true, true));
  }
}

// ---------------------------------------------------------------------------
// theta-consistency: ratio vs series estimators of theta.
// ---------------------------------------------------------------------------
void run_theta_consistency(const ExperimentConfig& cfg, Outputs& out) {
  Rng root(cfg.seed, 23);
  const std::size_t n = cfg.n_list.back();
  ThetaEstimate ratio, series;
  const auto step = cfg.model.exact_renewal_step();
  RenewalTable v;
  if (step) v = make_exact_two_point_renewal(*step, {0.0});
  std::vector<std::function<void()>> tasks;
  tasks.push_back([&] {
    Rng r = root.split(1);
    ratio = theta_ratio(cfg.model, n, cfg.samples, r);
  });
  tasks.push_back([&] {
    Rng r = root.split(2);
    series = theta_series(cfg.model, cfg.series_terms, cfg.horizon,
                          cfg.samples, r, 4000.0, step ? &v : nullptr);
  });
  run_tasks(tasks, cfg.threads);

  CsvWriter csv({"method", "value", "ci_low", "ci_high", "samples",
                 "truncation_diagnostic"});
  const auto add = [&](const ThetaEstimate& t, double diag) {
    std::vector<std::string> row{t.method, CsvWriter::format_double(t.value),
                                 CsvWriter::format_double(t.ci_low),
                                 CsvWriter::format_double(t.ci_high),
                                 std::to_string(t.samples),
                                 CsvWriter::format_double(diag)};
    csv.add_row_mixed(row);
  };
  add(ratio, 0.0);
  add(series, series.truncation_diagnostic);
  out.add_file("theta.csv", csv.text());
  out.add_file("theta_ratio.json", theta_estimate_json(ratio) + "\n");
  out.add_file("theta_series.json", theta_estimate_json(series) + "\n");

  out.verdict("theta-overlap", ratio.overlaps(series),
              std::abs(ratio.value - series.value),
              (ratio.ci_high - ratio.ci_low) / 2 +
                  (series.ci_high - series.ci_low) / 2,
              "ratio and series 95% CIs overlap");
  out.verdict("theta-positive", ratio.value > 0.0 && series.value > 0.0,
              std::min(ratio.value, series.value), 0.0);
  out.verdict("series-truncation", series.truncation_diagnostic <= 0.10,
              series.truncation_diagnostic, 0.10,
              "last-decade term share of the series");
  out.summary["ratio"] =
      ordered_json{{"value", ratio.value}, {"ci_low", ratio.ci_low},
                   {"ci_high", ratio.ci_high}, {"n", ratio.n}};
  out.summary["series"] =
      ordered_json{{"value", series.value},
                   {"ci_low", series.ci_low},
                   {"ci_high", series.ci_high},
                   {"terms", series.terms},
                   {"horizon", series.horizon},
                   {"truncated_value", series.truncated_value},
                   {"tail_completion", series.tail_completion},
                   {"truncation", series.truncation_diagnostic}};
}

// ---------------------------------------------------------------------------
// growth-law: conditioned rescaled paths are asymptotically constant.
// ---------------------------------------------------------------------------
void run_growth_law(const ExperimentConfig& cfg, Outputs& out) {
  Rng root(cfg.seed, 31);
  struct PerN {
    std::vector<double> ratios;
    std::vector<double> endpoints;
    double min_endpoint = 0.0;
    std::string example_path_csv;
    std::string example_population_csv;
  };
  std::vector<PerN> results(cfg.n_list.size());
  std::vector<std::function<void()>> tasks;
  for (std::size_t i = 0; i < cfg.n_list.size(); ++i)
    tasks.push_back([&, i] {
      const std::size_t n = cfg.n_list[i];
      const std::size_t r = n / 5;
      Rng rng = root.split(i);
      PerN& res = results[i];
      res.min_endpoint = std::numeric_limits<double>::infinity();
      for (std::uint64_t s = 0; s < cfg.samples; ++s) {
        const ConditionedRun run =
            sample_conditioned_on_survival(cfg.model, n, rng);
        const RescaledPath path = rescaled_path(run.pop, run.env, r);
        if (s == 0) {
          res.example_path_csv = rescaled_path_csv(path);
          res.example_population_csv = population_path_csv(run.pop, run.env);
        }
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (std::size_t j = 0; j < path.t.size(); ++j) {
          if (path.t[j] < 0.2) continue;
          lo = std::min(lo, path.value[j]);
          hi = std::max(hi, path.value[j]);
        }
        res.ratios.push_back(hi / lo);
        const double w = path.value.back();
        res.endpoints.push_back(w);
        res.min_endpoint = std::min(res.min_endpoint, w);
      }
    });
  run_tasks(tasks, cfg.threads);
  for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
    const std::string tag = std::to_string(cfg.n_list[i]);
    out.add_file("example_rescaled_n" + tag + ".csv",
                 results[i].example_path_csv);
    out.add_file("example_population_n" + tag + ".csv",
                 results[i].example_population_csv);
  }

  CsvWriter csv({"n", "r", "median_ratio", "q90_ratio", "median_W", "min_W"});
  std::vector<double> medians;
  bool endpoints_positive = true;
  for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
    PerN& res = results[i];
    const double med = median(res.ratios);
    medians.push_back(med);
    endpoints_positive = endpoints_positive && res.min_endpoint > 0.0;
    csv.add_row(std::vector<double>{
        static_cast<double>(cfg.n_list[i]),
        static_cast<double>(cfg.n_list[i] / 5), med,
        quantile(res.ratios, 0.9), median(res.endpoints), res.min_endpoint});
  }
  out.add_file("growth_law.csv", csv.text());

  CsvWriter ecdf({"n", "w"});
  for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
    std::vector<double> w = results[i].endpoints;
    std::sort(w.begin(), w.end());
    for (double x : w)
      ecdf.add_row(std::vector<double>{static_cast<double>(cfg.n_list[i]), x});
  }
  out.add_file("growth_law_w_ecdf.csv", ecdf.text());

  out.verdict("ratio-median-small", medians.back() < 1.5, medians.back(), 1.5,
              "median over paths of max/min of X_t on t in [0.2,1]");
  bool decreasing = true;
  for (std::size_t i = 1; i < medians.size(); ++i)
    decreasing = decreasing && medians[i] < medians[i - 1];
  out.verdict("ratio-median-decreasing", decreasing,
              medians.back() - medians.front(), 0.0,
              "median ratio decreases in n");
  out.verdict("endpoint-positive", endpoints_positive, 0.0, 0.0,
              "W > 0 on every conditioned path");
  out.summary["medians"] = medians;
}

// ---------------------------------------------------------------------------
// tau-min-limit: the conditioned law of (tau_n, min S) stabilizes in n.
// ---------------------------------------------------------------------------
void run_tau_min_limit(const ExperimentConfig& cfg, Outputs& out) {
  Rng root(cfg.seed, 37);
  struct PerN {
    std::vector<double> tau;
    std::vector<double> min0;
  };
  std::vector<PerN> results(cfg.n_list.size());
  std::vector<std::function<void()>> tasks;
  for (std::size_t i = 0; i < cfg.n_list.size(); ++i)
    tasks.push_back([&, i] {
      Rng rng = root.split(i);
      PerN& res = results[i];
      for (std::uint64_t s = 0; s < cfg.samples; ++s) {
        const ConditionedRun run =
            sample_conditioned_on_survival(cfg.model, cfg.n_list[i], rng);
        const FluctuationSummary f = fluctuation_summary(run.env.sums);
        res.tau.push_back(static_cast<double>(f.tau));
        res.min0.push_back(f.min_including_start());
      }
    });
  run_tasks(tasks, cfg.threads);

  CsvWriter csv({"n", "tau", "min0"});
  for (std::size_t i = 0; i < cfg.n_list.size(); ++i)
    for (std::size_t s = 0; s < results[i].tau.size(); ++s)
      csv.add_row(std::vector<double>{static_cast<double>(cfg.n_list[i]),
                                      results[i].tau[s], results[i].min0[s]});
  out.add_file("tau_min_samples.csv", csv.text());

  const PerN& a = results.front();
  const PerN& b = results.back();
  const KsResult ks_tau = ks_two_sample(a.tau, b.tau, 0.01);
  const KsResult ks_min = ks_two_sample(a.min0, b.min0, 0.01);
  out.verdict("tau-ecdf-stable", ks_tau.pass(), ks_tau.statistic,
              ks_tau.threshold, "KS(tau | Z_n>0) across n");
  out.verdict("min-ecdf-stable", ks_min.pass(), ks_min.statistic,
              ks_min.threshold, "KS(min S | Z_n>0) across n");
  out.summary["ks_tau"] = ordered_json{{"d", ks_tau.statistic},
                                       {"threshold", ks_tau.threshold},
                                       {"p", ks_tau.p_value}};
  out.summary["ks_min"] = ordered_json{{"d", ks_min.statistic},
                                       {"threshold", ks_min.threshold},
                                       {"p", ks_min.p_value}};
}

// ---------------------------------------------------------------------------
// walk-limit: conditioned-on-survival walk marginals match conditioned-to-
// stay-nonnegative marginals after self-normalization; same for log Z.
// ---------------------------------------------------------------------------
void run_walk_limit(const ExperimentConfig& cfg, Outputs& out) {
  const std::size_t n = cfg.n_list.back();
  const std::size_t half = n / 2;
  Rng root(cfg.seed, 41);
  std::vector<double> s_half_z, s_full_z, logz_half, logz_full;
  std::vector<double> s_half_l, s_full_l;
  std::vector<std::function<void()>> tasks;
  tasks.push_back([&] {
    Rng rng = root.split(1);
    for (std::uint64_t i = 0; i < cfg.samples; ++i) {
      const ConditionedRun run =
          sample_conditioned_on_survival(cfg.model, n, rng);
      s_half_z.push_back(run.env.sums[half]);
      s_full_z.push_back(run.env.sums[n]);
      logz_half.push_back(run.pop.log_sizes[half]);
      logz_full.push_back(run.pop.log_sizes[n]);
    }
  });
  tasks.push_back([&] {
    Rng rng = root.split(2);
    std::vector<double> s;
    for (std::uint64_t i = 0; i < cfg.samples; ++i) {
      sample_walk_conditioned(cfg.model, n, rng, s);
      s_half_l.push_back(s[half]);
      s_full_l.push_back(s[n]);
    }
  });
  run_tasks(tasks, cfg.threads);

  const auto normalize = [](std::vector<double> vals, double scale) {
    for (double& v : vals) v /= scale;
    return vals;
  };
  const auto abs_median = [](std::vector<double> vals) {
    for (double& v : vals) v = std::abs(v);
    return median(std::move(vals));
  };
  // One scaling sequence for both walk ensembles, exactly as in the limit
  // theorems (a per-ensemble median would also knock lattice walks onto
  // misaligned atoms and inflate the KS distance); log Z keeps its own
  // median, which anchors away the O(1) martingale-factor offset at t = 1.
  const double scale_s = abs_median(s_full_z);
  const double scale_logz = abs_median(logz_full);

  const std::vector<double> a_half = normalize(s_half_z, scale_s);
  const std::vector<double> a_full = normalize(s_full_z, scale_s);
  const std::vector<double> b_half = normalize(s_half_l, scale_s);
  const std::vector<double> b_full = normalize(s_full_l, scale_s);
  const std::vector<double> c_half = normalize(logz_half, scale_logz);
  const std::vector<double> c_full = normalize(logz_full, scale_logz);

  const KsResult ks_s_half = ks_two_sample(a_half, b_half, 0.01);
  const KsResult ks_s_full = ks_two_sample(a_full, b_full, 0.01);
  const KsResult ks_z_half = ks_two_sample(c_half, b_half, 0.01);
  const KsResult ks_z_full = ks_two_sample(c_full, b_full, 0.01);

  CsvWriter csv({"series", "t", "value"});
  const auto dump = [&](const char* name, double t,
                        const std::vector<double>& vals) {
    for (double v : vals) {
      std::vector<std::string> row{name, CsvWriter::format_double(t),
                                   CsvWriter::format_double(v)};
      csv.add_row_mixed(row);
    }
  };
  dump("S_given_Zn", 0.5, a_half);
  dump("S_given_Zn", 1.0, a_full);
  dump("S_given_Ln", 0.5, b_half);
  dump("S_given_Ln", 1.0, b_full);
  dump("logZ_given_Zn", 0.5, c_half);
  dump("logZ_given_Zn", 1.0, c_full);
  out.add_file("walk_limit_marginals.csv", csv.text());

  const auto verdict_ks = [&](const char* name, const KsResult& ks) {
    out.verdict(name, ks.pass(), ks.statistic, ks.threshold,
                "two-sample KS at alpha=0.01");
    out.summary[name] = ordered_json{{"d", ks.statistic},
                                     {"threshold", ks.threshold},
                                     {"p", ks.p_value}};
  };
  verdict_ks("walk-marginal-t0.5", ks_s_half);
  verdict_ks("walk-marginal-t1.0", ks_s_full);
  verdict_ks("logz-marginal-t0.5", ks_z_half);
  verdict_ks("logz-marginal-t1.0", ks_z_full);
}

// ---------------------------------------------------------------------------
// renewal: v-hat tables by two routes, harmonicity, shape properties.
// ---------------------------------------------------------------------------
void run_renewal(const ExperimentConfig& cfg, Outputs& out) {
  Rng root(cfg.seed, 43);
  std::vector<double> grid;
  for (int g = 0; g < 20; ++g) grid.push_back(3.0 * g / 19.0);

  RenewalTable ladder, tau;
  std::vector<std::function<void()>> tasks;
  tasks.push_back([&] {
    Rng rng = root.split(1);
    ladder = estimate_renewal_v_mc(cfg.model, grid, cfg.samples, rng);
  });
  tasks.push_back([&] {
    Rng rng = root.split(2);
    tau = estimate_renewal_v_tau(cfg.model, grid, cfg.samples, rng);
  });
  run_tasks(tasks, cfg.threads);

  CsvWriter csv({"x", "v_ladder", "stderr_ladder", "v_tau", "stderr_tau",
                 "diff_sigmas"});
  double worst_sigma = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double se = std::hypot(ladder.stderr_v[g], tau.stderr_v[g]);
    const double sig =
        se > 0.0 ? std::abs(ladder.v_hat[g] - tau.v_hat[g]) / se : 0.0;
    worst_sigma = std::max(worst_sigma, sig);
    csv.add_row(std::vector<double>{grid[g], ladder.v_hat[g],
                                    ladder.stderr_v[g], tau.v_hat[g],
                                    tau.stderr_v[g], sig});
  }
  out.add_file("renewal_tables.csv", csv.text());
  out.add_file("renewal_ladder.csv", ladder.to_csv());
  out.add_file("renewal_tau.csv", tau.to_csv());
  out.verdict("renewal-cross-check", worst_sigma <= 4.0, worst_sigma, 4.0,
              "ladder vs tau estimator, worst grid point, in sigmas");

  bool monotone = true;
  for (std::size_t g = 1; g < grid.size(); ++g)
    monotone = monotone &&
               ladder.v_hat[g] >=
                   ladder.v_hat[g - 1] -
                       3.0 * std::hypot(ladder.stderr_v[g],
                                        ladder.stderr_v[g - 1]);
  out.verdict("renewal-monotone", monotone, 0.0, 0.0,
              "v-hat nondecreasing within noise");

  bool subadditive = true;
  double worst_sub = -1e300;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (grid[i] + grid[j] > grid.back()) continue;
      const double lhs = ladder.value(grid[i] + grid[j]);
      const double rhs = ladder.v_hat[i] + ladder.v_hat[j];
      const double slack = 3.0 * (ladder.stderr_at(grid[i] + grid[j]) +
                                  ladder.stderr_v[i] + ladder.stderr_v[j]);
      worst_sub = std::max(worst_sub, lhs - rhs - slack);
      if (lhs > rhs + slack) subadditive = false;
    }
  out.verdict("renewal-subadditive", subadditive, worst_sub, 0.0,
              "v(x+y) <= v(x)+v(y) within noise");

  Rng hrng = root.split(3);
  const Estimate res = check_harmonicity(ladder, cfg.model, 1.0,
                                         std::max<std::uint64_t>(cfg.samples, 4) * 10,
                                         hrng);
  out.verdict("harmonicity-zero", res.contains(0.0), res.value,
              res.half_width(), "E v(x+X) - v(x) at x=1, CI contains 0");

  // Exact TwoPoint block: closed form and exactly-zero harmonicity residuals.
  {
    const EnvironmentModel tp(Family::LinearFractionalGeometric,
                              IncrementLaw::two_point(1.0));
    std::vector<double> igrid;
    for (int g = 0; g <= 8; ++g) igrid.push_back(0.5 * g);
    Rng trng = root.split(4);
    const RenewalTable exact = estimate_renewal_v(tp, igrid, 10, trng);
    bool closed = exact.exact;
    for (double x : igrid)
      closed = closed && exact.value(x) == std::floor(x) + 1.0;
    out.verdict("two-point-closed-form", closed, 0.0, 0.0,
                "v(x) = floor(x)+1 with exact flag");
    double worst = 0.0;
    for (double x : {0.0, 1.0, 2.0, 3.0}) {
      const Estimate h = check_harmonicity(exact, tp, x, 10, trng);
      worst = std::max(worst, std::abs(h.value));
    }
    out.verdict("two-point-harmonicity-exact", worst == 0.0, worst, 0.0,
                "residual exactly 0 at integer x");
  }

  out.summary["worst_cross_sigma"] = worst_sigma;
  out.summary["harmonicity"] = estimate_json(res);
  if (cfg.svg) {
    SvgSeries l{"ladder", grid, ladder.v_hat};
    SvgSeries t{"tau", grid, tau.v_hat};
    out.add_file("renewal.svg",
                 svg_line_plot("Renewal function", {l, t}, false, false));
  }
}

// ---------------------------------------------------------------------------
// validate: every module's invariant/property checks at desk scale.
// ---------------------------------------------------------------------------
void run_validate(const ExperimentConfig& cfg, Outputs& out) {
  Rng root(cfg.seed, 53);
  const EnvironmentModel& model = cfg.model;
  const std::array<Family, 4> families = {
      Family::LinearFractionalGeometric, Family::Poisson, Family::Binary,
      Family::BoundedGeneric};

  // --- offspring ---
  {
    Rng rng = root.split(1);
    double worst_identity = 0.0, worst_eta = -1e300;
    for (int i = 0; i < 4000; ++i) {
      const OffspringLaw law = sample_random_law(families[i % 4], rng);
      if (law.pgf(1.0) != 1.0) worst_identity = 1.0;
      const double r = i % 3 == 0 ? rng.uniform(1e-6, 1.0) : rng.uniform();
      const double lhs = law.survival_map(r) + law.pgf(1.0 - r);
      if (r >= 1e-6)
        worst_identity = std::max(worst_identity, std::abs(lhs - 1.0));
      worst_eta = std::max(worst_eta, law.zeta(2) / 2.0 - law.eta());
    }
    out.verdict("offspring-pgf-survival-identity", worst_identity <= 1e-12,
                worst_identity, 1e-12,
                "survival_map + pgf(1-r) = 1 and pgf(1) = 1");
    out.verdict("offspring-zeta-eta", worst_eta <= 1e-12, worst_eta, 1e-12,
                "zeta(2)/2 <= eta on all families");
  }
  {
    Rng rng = root.split(2);
    bool pass = true;
    double worst = 0.0;
    for (Family f : families) {
      const OffspringLaw law = sample_random_law(f, rng);
      MeanAcc acc;
      const std::uint64_t z = 7;
      for (int i = 0; i < 100000; ++i)
        acc.add(static_cast<double>(law.sample_total(z, rng).total) /
                static_cast<double>(z));
      const double sig = std::abs(acc.mean - law.mean()) /
                         std::max(acc.stderr_mean(), 1e-300);
      worst = std::max(worst, sig);
      pass = pass && sig <= 4.0;
    }
    out.verdict("offspring-aggregate-mean", pass, worst, 4.0,
                "MC mean of sample_total/z vs mean(law), in sigmas");
  }
  {
    // Aggregate vs naive per-individual sampling, two-sample KS.
    Rng rng = root.split(3);
    const auto naive_one = [&](const OffspringLaw& law, Rng& r) -> double {
      switch (law.family()) {
        case Family::LinearFractionalGeometric: {
          const double p = 1.0 / (1.0 + law.mean());
          return std::floor(std::log(r.uniform()) / std::log1p(-p));
        }
        case Family::Poisson:
          return static_cast<double>(r.poisson(law.mean()));
        case Family::Binary:
          return r.bernoulli(law.param()) ? 2.0 : 0.0;
        case Family::BoundedGeneric: {
          double u = r.uniform();
          const auto& q = law.probs();
          for (std::size_t y = 0; y < q.size(); ++y) {
            if (u < q[y]) return static_cast<double>(y);
            u -= q[y];
          }
          return static_cast<double>(q.size() - 1);
        }
      }
      return 0.0;
    };
    bool pass = true;
    double worst_p = 1.0;
    for (Family f : families) {
      const OffspringLaw law = sample_random_law(f, rng);
      const std::uint64_t z = 50;
      std::vector<double> agg(10000), naive(10000);
      for (auto& v : agg)
        v = static_cast<double>(law.sample_total(z, rng).total);
      for (auto& v : naive) {
        double total = 0.0;
        for (std::uint64_t i = 0; i < z; ++i) total += naive_one(law, rng);
        v = total;
      }
      const KsResult ks = ks_two_sample(agg, naive, 0.01);
      worst_p = std::min(worst_p, ks.p_value);
      pass = pass && ks.p_value > 0.01;
    }
    out.verdict("offspring-aggregate-vs-naive", pass, worst_p, 0.01,
                "two-sample KS p-value, aggregate vs per-individual");
  }

  // --- walk ---
  {
    Rng rng = root.split(4);
    // Exact-lattice Lemma 2.1 rate flatness for the +-1 walk.
    std::vector<double> probs(20480);
    for (std::size_t m = 1; m <= probs.size(); ++m)
      probs[m - 1] = two_point_prob_nonneg(m);
    double lo = 1e300, hi = -1e300;
    for (std::size_t n : {64, 256, 1024}) {
      const SlowlyVaryingL l = slowly_varying_l(probs, 0.5, n);
      const double ratio = two_point_prob_min_nonneg(n) *
                           std::sqrt(static_cast<double>(n)) / l.value;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    out.verdict("walk-rate-flatness", hi / lo < 1.10, hi / lo, 1.10,
                "P{L_n>=0} n^{1/2} / l(n) flat across n (exact +-1 walk)");
    // l(n) with P == rho gives 1/Gamma(rho).
    std::vector<double> flat(2000, 0.5);
    const SlowlyVaryingL l0 = slowly_varying_l(flat, 0.5, 512);
    out.verdict("walk-l-gamma", std::abs(l0.value - 1.0 / std::sqrt(M_PI)) < 1e-12,
                l0.value, 1.0 / std::sqrt(M_PI), "l = 1/Gamma(1/2) when P == rho");
    // Deterministic summaries: identical inputs, identical outputs.
    std::vector<double> path(301, 0.0);
    for (std::size_t i = 1; i < path.size(); ++i)
      path[i] = path[i - 1] + rng.normal();
    const FluctuationSummary fa = fluctuation_summary(path);
    const FluctuationSummary fb = fluctuation_summary(path);
    out.verdict("walk-summary-deterministic",
                fa.tau == fb.tau && fa.ladder_epochs == fb.ladder_epochs &&
                    fa.ladder_heights == fb.ladder_heights,
                0.0, 0.0, "fluctuation_summary is a pure function");
    // Spitzer constant of the configured (symmetric) model. Lattice walks
    // put mass on {S_m = 0}, so their strict probabilities sit below 1/2 by
    // an exactly computable o(n) deficit.
    const std::size_t rho_n = 64;
    double expected = 0.5;
    if (model.exact_renewal_step()) {
      double corr = 0.0;
      for (std::size_t m = 2; m <= rho_n; m += 2)
        corr += two_point_prob_min_nonneg(m);  // = P{S_m = 0}, even m
      expected -= corr / (2.0 * static_cast<double>(rho_n));
    }
    const SpitzerEstimate rho = estimate_rho(model, rho_n, 20000, rng);
    const double rho_se = (rho.ci_high - rho.rho_hat) / 1.959964;
    out.verdict("walk-rho-half",
                std::abs(rho.rho_hat - expected) <= 4.0 * rho_se, rho.rho_hat,
                expected, "Cesaro estimate of rho (lattice deficit adjusted)");
  }

  // --- gf ---
  {
    Rng rng = root.split(5);
    double worst_g = -1e300, worst_jirina = 0.0, worst_agresti = -1e300;
    double worst_quench = -1e300;
    for (int trial = 0; trial < 2000; ++trial) {
      const Family f = families[trial % 4];
      const std::size_t n = 2 + rng.next_u64() % 40;
      std::vector<OffspringLaw> laws;
      for (std::size_t k = 0; k < n; ++k)
        laws.push_back(sample_random_law(f, rng));
      const EnvironmentPath env = environment_from_laws(std::move(laws));
      const double s = trial % 5 == 0 ? 0.0 : rng.uniform(0.0, 0.999);
      const std::size_t k = rng.next_u64() % n;
      for (const OffspringLaw& law : env.laws) {
        const double g = g_eval(law, s);
        worst_g = std::max(worst_g, std::max(-g, g - law.eta() * (1 + 1e-12)));
      }
      worst_jirina = std::max(worst_jirina, jirina_residual(env, k, s));
      const double exact = survival_given_env(env, k, s);
      const double bound = agresti_lower_bound(env, k, s);
      worst_agresti = std::max(worst_agresti, (bound - exact) / exact);
      // (1.3): survival <= exp(min S_m)
      double minS = 0.0;
      for (double v : env.sums) minS = std::min(minS, v);
      worst_quench = std::max(worst_quench, survival_given_env(env, 0, 0.0) -
                                                std::exp(minS) * (1 + 1e-12));
    }
    out.verdict("gf-g-bounds", worst_g <= 1e-12, worst_g, 1e-12,
                "0 <= g <= eta everywhere");
    out.verdict("gf-jirina", worst_jirina <= 1e-9, worst_jirina, 1e-9,
                "composition identity residual");
    out.verdict("gf-agresti", worst_agresti <= 1e-12, worst_agresti, 1e-12,
                "lower bound never exceeds the exact survival");
    out.verdict("gf-quenched-bound", worst_quench <= 0.0, worst_quench, 0.0,
                "survival <= exp(min S)");
  }
  {
    // Linear-fractional closed form: monotone in horizon, converges to the
    // infinite form within its tail bound.
    Rng rng = root.split(6);
    bool pass = true;
    for (int trial = 0; trial < 50; ++trial) {
      const EnvironmentPath env = sample_environment_path(model, 400, rng);
      double prev = 2.0;
      for (std::size_t h : {50, 100, 200, 400}) {
        const double v = lf_survival_exact(env, 0, h);
        pass = pass && v <= prev * (1 + 1e-12);
        prev = v;
      }
      const LfInfiniteSurvival inf = lf_survival_exact_infinite(env, 0);
      pass = pass && prev <= inf.value * (1 + 1e-12) &&
             inf.value - prev <= inf.tail_bound + 1e-12 * inf.value;
    }
    out.verdict("gf-lf-monotone-converges", pass, 0.0, 0.0,
                "finite-horizon LF survival decreases onto the infinite form");
  }

  // --- branching ---
  {
    Rng rng = root.split(7);
    bool absorbed = true;
    for (int trial = 0; trial < 200; ++trial) {
      const EnvironmentPath env = sample_environment_path(model, 64, rng);
      const PopulationPath pop = simulate_population(env, 1, 1000000, rng);
      bool dead = false;
      for (double z : pop.sizes) {
        if (dead && z != 0.0) absorbed = false;
        if (z == 0.0) dead = true;
      }
    }
    out.verdict("branching-absorption", absorbed, 0.0, 0.0,
                "Z = 0 is absorbing on every simulated path");
  }
  {
    // Quenched martingale Z_n / mu_n on an environment with all S_k >= 0.
    Rng rng = root.split(8);
    std::vector<OffspringLaw> laws;
    for (int k = 0; k < 8; ++k)
      laws.push_back(OffspringLaw::linear_fractional(k % 2 == 0 ? 2.0 : 0.5));
    const EnvironmentPath env = environment_from_laws(std::move(laws));
    MeanAcc acc;
    const double mu = std::exp(env.sums.back());
    for (int i = 0; i < 100000; ++i) {
      const PopulationPath pop = simulate_population(env, 1, 1000000, rng);
      acc.add(pop.sizes.back() / mu);
    }
    const double sig =
        std::abs(acc.mean - 1.0) / std::max(acc.stderr_mean(), 1e-300);
    out.verdict("branching-quenched-martingale", sig <= 4.0, sig, 4.0,
                "mean Z_n/mu_n = 1, in sigmas");
  }
  {
    // Annealed bound (1.3) and Rao-Blackwell variance dominance.
    Rng rng = root.split(9);
    const std::size_t n = 64;
    Rng r1 = rng.split(1), r2 = rng.split(2), r3 = rng.split(3);
    const Estimate naive =
        estimate_survival(model, n, 20000, r1, SurvivalMode::Naive);
    const Estimate rb =
        estimate_survival(model, n, 20000, r2, SurvivalMode::RaoBlackwell);
    MeanAcc bound_acc;
    for (int i = 0; i < 20000; ++i) {
      double s = 0.0, lmin = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        s += model.sample_increment(r3);
        lmin = std::min(lmin, s);
      }
      bound_acc.add(std::exp(lmin));
    }
    const Estimate bound = mean_estimate(bound_acc, 0.95);
    const double se =
        std::hypot(naive.half_width(), bound.half_width()) / 1.959964;
    out.verdict("branching-annealed-bound",
                naive.value <= bound.value + 4.0 * se,
                naive.value - bound.value, 4.0 * se,
                "P{Z_n>0} <= E exp(min S) within noise");
    out.verdict("branching-rb-agrees",
                std::abs(rb.value - naive.value) <=
                    4.0 * std::hypot(rb.half_width(), naive.half_width()) /
                        1.959964,
                std::abs(rb.value - naive.value), 0.0,
                "naive and Rao-Blackwell estimates agree");
    out.verdict("branching-rb-variance", rb.half_width() <= naive.half_width(),
                rb.half_width(), naive.half_width(),
                "Rao-Blackwell CI no wider than naive");
  }

  // --- conditioned ---
  {
    // Weighted total mass E[v(S_n) 1{L_n>=0}] = 1 (exact v).
    Rng rng = root.split(10);
    const auto step = model.exact_renewal_step();
    if (step) {
      const RenewalTable v = make_exact_two_point_renewal(*step, {0.0});
      bool pass = true;
      double worst = 0.0;
      for (std::size_t n : {4, 16, 64}) {
        const Estimate mass = plus_expectation(
            model, [](std::span<const double>) { return 1.0; }, 1, n, 200000,
            rng, PlusMode::Weighted, &v);
        const double sig =
            std::abs(mass.value - 1.0) * 1.959964 /
            std::max(mass.ci_high - mass.value, 1e-300);
        worst = std::max(worst, sig);
        pass = pass && sig <= 4.0;
      }
      out.verdict("conditioned-unit-mass", pass, worst, 4.0,
                  "mean v(S_n)1{L_n>=0} = 1, worst n, in sigmas");
    }
  }
  {
    // One-step h-transform kernel out of 0 for the +-1 lattice walk:
    // P+{S_1 = +1} = 1, exactly visible in accepted {L_n >= 0} paths.
    const EnvironmentModel tp(Family::LinearFractionalGeometric,
                              IncrementLaw::two_point(1.0));
    Rng rng = root.split(11);
    std::vector<double> s;
    bool all_up = true;
    for (int i = 0; i < 2000; ++i) {
      sample_walk_conditioned(tp, 16, rng, s);
      all_up = all_up && s[1] == 1.0;
    }
    out.verdict("conditioned-h-kernel", all_up, all_up ? 1.0 : 0.0, 1.0,
                "accepted paths never step down first");
  }
  {
    // Tanaka: post-nu increment degeneracy on the lattice and epoch/height
    // identity at moderate scale.
    Rng rng = root.split(12);
    const auto step = model.exact_renewal_step();
    if (step) {
      const RenewalTable v = make_exact_two_point_renewal(*step, {0.0});
      const TanakaCheck check =
          tanaka_ladder_check(model, v, 4096, 0, 1024, 20000.0, 20000, rng,
                              NuDetection::ExactTail, 0.01);
      out.verdict("tanaka-epoch", check.ks_epoch.pass(),
                  check.ks_epoch.statistic, check.ks_epoch.threshold,
                  "KS(nu vs iota)");
      out.verdict("tanaka-height", check.ks_height.pass(),
                  check.ks_height.statistic, check.ks_height.threshold,
                  "KS(S_nu vs S_iota)");
      out.verdict("tanaka-mass", check.mass_agrees(),
                  std::abs(check.nu_mass - check.iota_mass), 0.0,
                  "P+{nu<=t0} vs P{iota<=t0}");
      bool post_up = true;
      for (double d : check.samples.nu_post_increment)
        post_up = post_up && d > 0.0;
      out.verdict("tanaka-post-increment", post_up, 0.0, 0.0,
                  "increment after a prospective minimum never descends");
      const double corr = correlation(check.samples.nu_epoch,
                                      check.samples.nu_post_increment);
      out.verdict("tanaka-independence", std::abs(corr) <= 0.05,
                  corr, 0.05, "corr(nu, post-nu increment)");
    }
  }
  {
    // Lemma 2.7 series: conditioned sums converge; the S == 0 contrast case
    // grows linearly.
    Rng rng = root.split(13);
    int converged = 0;
    const int trials = 400;
    for (int i = 0; i < trials; ++i) {
      const ConditionedEnv ce = sample_walk_given_Ln(model, 4096, rng);
      const std::vector<double> sums = eta_series_partial_sums(ce.env, 1024);
      if (last_decade_relative_increment(sums) < 0.01) ++converged;
    }
    out.verdict("conditioned-eta-series",
                converged >= static_cast<int>(0.95 * trials),
                static_cast<double>(converged) / trials, 0.95,
                "last-decade increment < 1% in at least 95% of samples");
    std::vector<OffspringLaw> flat(512, OffspringLaw::linear_fractional(1.0));
    const EnvironmentPath env0 = environment_from_laws(std::move(flat));
    const std::vector<double> sums0 = eta_series_partial_sums(env0, 512);
    const double half = sums0[sums0.size() / 2 - 1];
    out.verdict("conditioned-eta-series-contrast",
                sums0.back() > 1.9 * half, sums0.back() / half, 1.9,
                "flat-walk partial sums keep growing linearly");
  }
  {
    // Jagers criterion diagnostic on conditioned environments.
    Rng rng = root.split(14);
    bool pass = true;
    for (int i = 0; i < 20; ++i) {
      const ConditionedEnv ce = sample_walk_given_Ln(model, 512, rng);
      double half = 0.0, full = 0.0;
      for (std::size_t k = 0; k < ce.env.generations(); ++k) {
        const double term = 1.0 - ce.env.laws[k].prob_one();
        full += term;
        if (k < ce.env.generations() / 2) half += term;
      }
      pass = pass && full > 1.8 * half && full > 10.0;
    }
    out.verdict("conditioned-jagers", pass, 0.0, 0.0,
                "sum (1 - Q({1})) keeps diverging on conditioned paths");
  }
  {
    // Weighted and conditional P+ expectations agree (Lemma 2.5).
    Rng rng = root.split(15);
    const auto step = model.exact_renewal_step();
    if (step) {
      const RenewalTable v = make_exact_two_point_renewal(*step, {0.0});
      bool pass = true;
      double worst = 0.0;
      const auto y = [](std::span<const double> s) { return s.back(); };
      for (std::size_t n : {64, 256}) {
        Rng r1 = rng.split(n);
        Rng r2 = rng.split(n + 1);
        const Estimate w =
            plus_expectation(model, y, 3, n, 400000, r1, PlusMode::Weighted, &v);
        const Estimate c =
            plus_expectation(model, y, 3, n, 20000, r2, PlusMode::Conditional);
        const double tol = w.half_width() + c.half_width();
        worst = std::max(worst, std::abs(w.value - c.value) - tol);
        pass = pass && std::abs(w.value - c.value) <= tol + 0.02;
      }
      out.verdict("conditioned-mode-agreement", pass, worst, 0.02,
                  "weighted vs conditional E+[S_3], n in {64,256}");
    }
  }
  {
    // Ultimate survival: P{W+ > 0} matches the exact quenched estimate.
    Rng rng = root.split(16);
    const auto step = model.exact_renewal_step();
    const RenewalTable v = step ? make_exact_two_point_renewal(*step, {0.0})
                                : RenewalTable{};
    const WplusResult res = wplus_and_ultimate_survival(
        model, 512, 3000.0, rng, step ? &v : nullptr);
    if (res.ultimate_exact) {
      const double tol = res.p_w_positive.half_width() +
                         res.ultimate_exact->half_width() + 0.02;
      out.verdict("conditioned-wplus-ultimate",
                  std::abs(res.p_w_positive.value -
                           res.ultimate_exact->value) <= tol,
                  std::abs(res.p_w_positive.value - res.ultimate_exact->value),
                  tol, "P{Z_m > 0} vs exact quenched ultimate survival");
      out.verdict("conditioned-bracket",
                  res.ultimate_lower.value <=
                          res.ultimate_upper.value + 1e-12 &&
                      res.ultimate_upper.value <=
                          res.ultimate_exact->value + 1e-12 &&
                      res.ultimate_exact->value - res.ultimate_upper.value <=
                          res.mean_tail_bound + 1e-12,
                  res.ultimate_exact->value, 0.0,
                  "minorant <= horizon <= exact <= horizon + tail bound");
    }
  }

  // --- stats ---
  {
    Rng rng = root.split(17);
    bool pass = true;
    double worst = 1.0;
    for (double p : {0.05, 0.5}) {
      int covered = 0;
      const int reps = 1000;
      for (int i = 0; i < reps; ++i) {
        const std::uint64_t k = rng.binomial(200, p);
        const Estimate e = wilson_interval(k, 200, 0.95);
        if (e.ci_low <= p && p <= e.ci_high) ++covered;
      }
      const double coverage = static_cast<double>(covered) / reps;
      worst = std::min(worst, coverage);
      pass = pass && coverage >= 0.93;
    }
    out.verdict("stats-wilson-coverage", pass, worst, 0.93,
                "empirical coverage of the 95% Wilson interval");
  }
  {
    Rng rng = root.split(18);
    std::vector<double> sample(500), ones(500, 1.0);
    for (double& x : sample) x = rng.normal();
    const KsResult ks = ks_two_sample(sample, ones, sample, {}, 0.01);
    out.verdict("stats-weighted-ecdf", ks.statistic == 0.0, ks.statistic, 0.0,
                "unit-weight ECDF equals unweighted ECDF");
    const std::vector<double> n{10, 100, 1000, 10000};
    std::vector<double> y;
    for (double v : n) y.push_back(std::pow(v, -0.5));
    const SlopeFit fit = loglog_slope(n, y);
    out.verdict("stats-loglog-slope", std::abs(fit.slope + 0.5) < 1e-12,
                fit.slope, -0.5, "exact power law recovered");
  }
}

// ---------------------------------------------------------------------------

void dispatch(const ExperimentConfig& cfg, Outputs& out) {
  if (cfg.experiment == "survival-asymptotics")
    run_survival_asymptotics(cfg, out);
  else if (cfg.experiment == "theta-consistency")
    run_theta_consistency(cfg, out);
  else if (cfg.experiment == "growth-law")
    run_growth_law(cfg, out);
  else if (cfg.experiment == "tau-min-limit")
    run_tau_min_limit(cfg, out);
  else if (cfg.experiment == "walk-limit")
    run_walk_limit(cfg, out);
  else if (cfg.experiment == "renewal")
    run_renewal(cfg, out);
  else if (cfg.experiment == "validate")
    run_validate(cfg, out);
  else
    throw InvalidParameter("unknown experiment: " + cfg.experiment);
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults_for(const std::string& experiment) {
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  if (experiment == "survival-asymptotics") {
    cfg.n_list = {64, 256, 1024};
    cfg.samples = 100000;
  } else if (experiment == "theta-consistency") {
    cfg.n_list = {1024};
    cfg.samples = 100000;
    cfg.series_terms = 40;
    cfg.horizon = 2000;
  } else if (experiment == "growth-law") {
    cfg.n_list = {128, 512};
    cfg.samples = 1000;
  } else if (experiment == "tau-min-limit") {
    cfg.n_list = {256, 1024};
    cfg.samples = 5000;
  } else if (experiment == "walk-limit") {
    cfg.n_list = {1024};
    cfg.samples = 2000;
  } else if (experiment == "renewal") {
    cfg.model = EnvironmentModel(Family::Poisson, IncrementLaw::gaussian(1.0));
    cfg.samples = 100000;
  } else if (experiment == "validate") {
    cfg.samples = 0;
  } else {
    throw InvalidParameter("unknown experiment: " + experiment);
  }
  (void)kLog2;
  return cfg;
}

void ExperimentConfig::apply_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.contains("experiment")) experiment = j["experiment"].get<std::string>();
  if (j.contains("model")) model = EnvironmentModel::from_json_string(j["model"].dump());
  if (j.contains("n_list")) {
    n_list.clear();
    for (const auto& v : j["n_list"]) n_list.push_back(v.get<std::size_t>());
  }
  if (j.contains("samples")) samples = j["samples"].get<std::uint64_t>();
  if (j.contains("series_terms"))
    series_terms = j["series_terms"].get<std::size_t>();
  if (j.contains("horizon")) horizon = j["horizon"].get<std::size_t>();
  if (j.contains("lookahead")) lookahead = j["lookahead"].get<std::size_t>();
  if (j.contains("seed")) {
    seed = j["seed"].get<std::uint64_t>();
    seed_set = true;
  }
  if (j.contains("threads")) threads = j["threads"].get<int>();
  if (j.contains("svg")) svg = j["svg"].get<bool>();
  if (j.contains("out_dir")) out_dir = j["out_dir"].get<std::string>();
}

std::string ExperimentConfig::to_json_string() const {
  ordered_json j;
  j["experiment"] = experiment;
  j["model"] = nlohmann::json::parse(model.to_json_string());
  j["n_list"] = n_list;
  j["samples"] = samples;
  j["series_terms"] = series_terms;
  j["horizon"] = horizon;
  j["lookahead"] = lookahead;
  j["seed"] = seed;
  j["threads"] = threads;
  j["svg"] = svg;
  return j.dump(2);
}

std::string RunManifest::to_json_string() const {
  ordered_json j;
  j["artifact"] = version;
  j["experiment"] = experiment;
  j["config"] = nlohmann::json::parse(config_json);
  j["wall_seconds"] = wall_seconds;
  j["all_pass"] = all_pass();
  j["verdicts"] = ordered_json::array();
  for (const CheckResult& c : verdicts)
    j["verdicts"].push_back(ordered_json{{"name", c.name},
                                         {"pass", c.pass},
                                         {"value", c.value},
                                         {"bound", c.bound},
                                         {"detail", c.detail}});
  j["files"] = ordered_json::object();
  for (const auto& [name, digest] : file_digests) j["files"][name] = digest;
  return j.dump(2);
}

RunManifest run_experiment(const ExperimentConfig& config) {
  if (!config.seed_set)
    throw InvalidParameter("run_experiment: a seed is required (no wall-clock "
                           "seeding)");
  if (config.n_list.empty() && config.experiment != "validate" &&
      config.experiment != "renewal")
    throw InvalidParameter("run_experiment: empty n list");
  for (std::size_t n : config.n_list)
    if (n == 0) throw InvalidParameter("run_experiment: n values must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  Outputs out;
  out.summary["experiment"] = config.experiment;
  out.summary["seed"] = config.seed;
  dispatch(config, out);

  RunManifest manifest;
  manifest.experiment = config.experiment;
  manifest.config_json = config.to_json_string();
  manifest.verdicts = out.verdicts;

  out.summary["verdicts"] = ordered_json::array();
  for (const CheckResult& c : out.verdicts)
    out.summary["verdicts"].push_back(ordered_json{{"name", c.name},
                                                   {"pass", c.pass},
                                                   {"value", c.value},
                                                   {"bound", c.bound},
                                                   {"detail", c.detail}});
  out.add_file("summary.json", out.summary.dump(2) + "\n");

  std::filesystem::create_directories(config.out_dir);
  for (const auto& [name, content] : out.files) {
    write_file(config.out_dir / name, content);
    manifest.file_digests.emplace_back(name, sha256_hex(content));
  }
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  write_file(config.out_dir / "manifest.json",
             manifest.to_json_string() + "\n");
  return manifest;
}

}  // namespace bpre
