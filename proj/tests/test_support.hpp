#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "bpre/offspring.hpp"
#include "bpre/rng.hpp"

namespace bpre::testing {

// Environment stand-in with one fixed law and a deterministic increment;
// used where the spec exercises degenerate environments that the model
// classes (rightly) reject.
struct FixedLawModel {
  OffspringLaw law;
  double x;

  double sample_increment(Rng&) const { return x; }
  OffspringLaw law_for(double) const { return law; }
};

inline FixedLawModel fixed_model(OffspringLaw law) {
  const double x = std::log(law.mean());
  return FixedLawModel{std::move(law), x};
}

// Exact pmf for the finitely supported families; the DP oracle below only
// handles those.
inline std::vector<double> law_pmf(const OffspringLaw& law) {
  switch (law.family()) {
    case Family::BoundedGeneric:
      return law.probs();
    case Family::Binary:
      return {1.0 - law.param(), 0.0, law.param()};
    default:
      throw std::logic_error("law_pmf: oracle only covers bounded laws");
  }
}

// Distribution of Z_n for an environment of *bounded* laws, z0 = 1.
inline std::vector<double> population_distribution(
    const std::vector<OffspringLaw>& laws) {
  std::vector<double> dist = {0.0, 1.0};  // P{Z_0 = 1} = 1
  for (const OffspringLaw& law : laws) {
    const std::vector<double> pmf = law_pmf(law);
    // p^{*z} for all z up to the current support, built iteratively.
    const std::size_t zmax = dist.size() - 1;
    std::vector<std::vector<double>> power(zmax + 1);
    power[0] = {1.0};
    for (std::size_t z = 1; z <= zmax; ++z) {
      const std::vector<double>& prev = power[z - 1];
      std::vector<double> cur(prev.size() + pmf.size() - 1, 0.0);
      for (std::size_t i = 0; i < prev.size(); ++i)
        for (std::size_t j = 0; j < pmf.size(); ++j)
          cur[i + j] += prev[i] * pmf[j];
      power[z] = std::move(cur);
    }
    std::size_t out_size = 1;
    for (std::size_t z = 0; z <= zmax; ++z)
      if (dist[z] > 0.0) out_size = std::max(out_size, power[z].size());
    std::vector<double> next(out_size, 0.0);
    for (std::size_t z = 0; z <= zmax; ++z) {
      if (dist[z] == 0.0) continue;
      for (std::size_t t = 0; t < power[z].size(); ++t)
        next[t] += dist[z] * power[z][t];
    }
    dist = std::move(next);
  }
  return dist;
}

inline double enumerated_survival(const std::vector<OffspringLaw>& laws) {
  return 1.0 - population_distribution(laws)[0];
}

}  // namespace bpre::testing
