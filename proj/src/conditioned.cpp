#include "bpre/conditioned.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace bpre {

std::string theta_estimate_json(const ThetaEstimate& t) {
  nlohmann::ordered_json j;
  j["method"] = t.method;
  j["value"] = t.value;
  j["ci_low"] = t.ci_low;
  j["ci_high"] = t.ci_high;
  j["samples"] = t.samples;
  if (t.method == "ratio") {
    j["n"] = t.n;
  } else {
    j["terms"] = t.terms;
    j["horizon"] = t.horizon;
    j["truncated_value"] = t.truncated_value;
    j["tail_completion"] = t.tail_completion;
    j["truncation_diagnostic"] = t.truncation_diagnostic;
  }
  return j.dump(2);
}

std::string weighted_law_csv(std::span<const double> values,
                             std::span<const double> weights) {
  if (!weights.empty() && weights.size() != values.size())
    throw InvalidParameter("weighted_law_csv: weight size mismatch");
  std::string out = "value,weight\n";
  char buf[72];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", values[i],
                  weights.empty() ? 1.0 : weights[i]);
    out += buf;
  }
  return out;
}

std::vector<double> eta_series_partial_sums(const EnvironmentPath& env,
                                            std::size_t terms) {
  if (terms > env.generations())
    throw InvalidParameter("eta_series_partial_sums: terms exceed path length");
  std::vector<double> out;
  out.reserve(terms);
  double sum = 0.0;
  double decay = 1.0;  // e^{-S_k} via the same mean() atoms as the laws
  for (std::size_t k = 0; k < terms; ++k) {
    sum += env.laws[k].eta() * decay;
    out.push_back(sum);
    decay /= env.laws[k].mean();
  }
  return out;
}

double last_decade_relative_increment(std::span<const double> partial_sums) {
  if (partial_sums.size() < 2)
    throw InvalidParameter("last_decade_relative_increment: need >= 2 sums");
  const std::size_t k = partial_sums.size();
  const std::size_t lo = k - std::max<std::size_t>(1, k / 10) - 1;
  const double total = partial_sums.back();
  if (total <= 0.0) return 0.0;
  return (total - partial_sums[lo]) / total;
}

}  // namespace bpre
