#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bpre/offspring.hpp"

namespace bpre {

inline constexpr const char* kArtifactVersion = "bpre 0.1.0";

// Batch experiment runner configuration. Every experiment is reproducible
// from (experiment, model, sizes, seed); there is no wall-clock seeding.
struct ExperimentConfig {
  std::string experiment;
  EnvironmentModel model{Family::LinearFractionalGeometric,
                         IncrementLaw::two_point(0.6931471805599453)};
  std::vector<std::size_t> n_list;
  std::uint64_t samples = 0;     // N
  std::size_t series_terms = 0;  // K (theta series)
  std::size_t horizon = 0;       // fresh-environment horizon (theta series)
  std::size_t lookahead = 0;     // tanaka window; 0 selects exact-tail mode
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::filesystem::path out_dir = "out";
  int threads = 1;
  bool svg = false;

  // Sizes pinned per experiment (survival-asymptotics, theta-consistency,
  // growth-law, tau-min-limit, walk-limit, renewal, validate).
  static ExperimentConfig defaults_for(const std::string& experiment);
  // Applies overrides from a JSON object on top of *this.
  void apply_json(const std::string& text);
  std::string to_json_string() const;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double bound = 0.0;
  std::string detail;
};

struct RunManifest {
  std::string experiment;
  std::string config_json;
  std::string version = kArtifactVersion;
  double wall_seconds = 0.0;
  std::vector<CheckResult> verdicts;
  std::vector<std::pair<std::string, std::string>> file_digests;

  bool all_pass() const {
    for (const CheckResult& c : verdicts)
      if (!c.pass) return false;
    return true;
  }
  std::string to_json_string() const;
};

// Runs the named experiment, writes summary.json, CSV data, optional SVG
// plots and manifest.json under config.out_dir, and returns the manifest.
RunManifest run_experiment(const ExperimentConfig& config);

}  // namespace bpre
