#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pentrace/config.hpp"
#include "pentrace/eval.hpp"

namespace pentrace {

inline constexpr const char* kToolVersion = "0.1.0";

// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer);

// Standard locations under the run directory.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path cohort() const { return root / "cohort"; }
  std::filesystem::path features() const { return root / "features"; }
  std::filesystem::path datasets() const { return root / "datasets"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path models() const { return root / "models"; }
  std::filesystem::path explain() const { return root / "explain"; }
  std::filesystem::path metrics() const { return root / "metrics.csv"; }
  std::filesystem::path run_json() const { return root / "run.json"; }

  std::filesystem::path feature_table(const std::string& dataset) const;
  std::filesystem::path report(ModelKind kind, const std::string& dataset,
                               const std::string& task) const;
  std::filesystem::path model(ModelKind kind, const std::string& dataset,
                              const std::string& task) const;
};

// Each command reads its inputs from and writes its outputs under
// cfg.run_dir, then records itself in run.json.
void cmd_synth(const RunConfig& cfg);
// `input` defaults to the cohort directory. CSV recordings need a
// manifest.csv beside them for subject groups; JSON recordings carry them.
void cmd_extract(const RunConfig& cfg, const std::optional<std::filesystem::path>& input = {});
void cmd_dataset(const RunConfig& cfg);
void cmd_train_eval(const RunConfig& cfg);
// Empty task/dataset means every configured one.
void cmd_explain(const RunConfig& cfg, const std::optional<std::string>& task = {},
                 const std::optional<std::string>& dataset = {});
void cmd_report(const RunConfig& cfg);

// Reads a feature table written by cmd_extract.
FeatureTable load_feature_table(const RunLayout& layout, const std::string& dataset);

// Machine-readable failure record: {"error": code, "message": text}.
std::string error_record(const std::string& code, const std::string& message);

}  // namespace pentrace
