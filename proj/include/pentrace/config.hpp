#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pentrace/dataset.hpp"
#include "pentrace/features.hpp"
#include "pentrace/models.hpp"
#include "pentrace/synth.hpp"

namespace pentrace {

inline constexpr int kDefaultShapPermutations = 2000;

struct RunConfig {
  std::filesystem::path run_dir = "run";
  std::uint64_t seed = 42;
  int jobs = 1;
  ExtractionParams extraction;
  TrainConfig train;
  bool fold_safe_scaling = false;
  std::vector<TaskSpec> tasks = default_tasks();
  std::vector<std::string> datasets = {"text", "list", "textlist"};
  int shap_permutations = kDefaultShapPermutations;
  CohortConfig cohort = CohortConfig::defaults();

  // Keeps the derived seeds (training, cohort) in step with `seed`.
  void set_seed(std::uint64_t s);
};

// Flat `key = value` lines; `#` starts a comment. Unknown keys and
// unparsable values raise ConfigInvalid.
void apply_config(RunConfig& cfg, std::istream& in);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

// Every key with its effective value, in a fixed order; the output parses
// back to the same configuration.
void print_config(std::ostream& out, const RunConfig& cfg);
std::vector<std::string> config_keys();

}  // namespace pentrace
