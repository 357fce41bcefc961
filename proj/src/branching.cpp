#include "bpre/branching.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace bpre {

PopulationPath simulate_population(const EnvironmentPath& env,
                                   std::uint64_t z0, std::uint64_t ceiling,
                                   Rng& rng) {
  const std::size_t n = env.generations();
  PopulationPath path;
  path.sizes.reserve(n + 1);
  path.log_sizes.reserve(n + 1);
  path.step_approx.reserve(n);
  PopulationState st;
  st.size = z0;
  path.sizes.push_back(st.value());
  path.log_sizes.push_back(st.log_value());
  for (std::size_t k = 0; k < n; ++k) {
    path.step_approx.push_back(
        population_step(st, env.laws[k], ceiling, rng) ? 1 : 0);
    path.sizes.push_back(st.value());
    path.log_sizes.push_back(st.log_value());
  }
  return path;
}

std::vector<double> conditional_means(const PopulationPath& path,
                                      const EnvironmentPath& env) {
  if (path.sizes.size() != env.sums.size())
    throw InvalidParameter("conditional_means: path/environment length mismatch");
  std::vector<double> mu(env.sums.size());
  const double z0 = path.sizes.front();
  for (std::size_t k = 0; k < mu.size(); ++k)
    mu[k] = z0 * std::exp(env.sums[k]);
  return mu;
}

std::string population_path_csv(const PopulationPath& path,
                                const EnvironmentPath& env) {
  const std::vector<double> mu = conditional_means(path, env);
  std::string out = "step,z,mu,flag\n";
  char buf[96];
  for (std::size_t k = 0; k < path.sizes.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%d\n", k, path.sizes[k],
                  mu[k], k == 0 ? 0 : (path.step_approx[k - 1] ? 1 : 0));
    out += buf;
  }
  return out;
}

std::string rescaled_path_csv(const RescaledPath& path) {
  std::string out = "t,value\n";
  char buf[72];
  for (std::size_t j = 0; j < path.t.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", path.t[j], path.value[j]);
    out += buf;
  }
  return out;
}

RescaledPath rescaled_path(const PopulationPath& path,
                           const EnvironmentPath& env, std::size_t r) {
  const std::size_t n = env.generations();
  if (path.sizes.size() != n + 1)
    throw InvalidParameter("rescaled_path: path/environment length mismatch");
  if (r > n) throw InvalidParameter("rescaled_path: r must be <= n");
  if (!(path.sizes.front() >= 1.0))
    throw InvalidParameter("rescaled_path: needs Z_0 >= 1");
  const double log_z0 = path.log_sizes.front();
  RescaledPath out;
  if (r == n) {
    out.t.push_back(0.0);
    out.value.push_back(path.sizes[n] == 0.0
                            ? 0.0
                            : std::exp(path.log_sizes[n] - log_z0 - env.sums[n]));
    return out;
  }
  const std::size_t steps = n - r;
  out.t.reserve(steps + 1);
  out.value.reserve(steps + 1);
  for (std::size_t j = 0; j <= steps; ++j) {
    const std::size_t idx = r + j;
    out.t.push_back(static_cast<double>(j) / static_cast<double>(steps));
    out.value.push_back(
        path.sizes[idx] == 0.0
            ? 0.0
            : std::exp(path.log_sizes[idx] - log_z0 - env.sums[idx]));
  }
  return out;
}

}  // namespace bpre
