#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pentrace/features.hpp"
#include "pentrace/matrix.hpp"
#include "pentrace/recording.hpp"

namespace pentrace {

struct SubjectFeatures {
  std::string subject_id;
  AgeGroup group = AgeGroup::YY;
  WritingTask task = WritingTask::Text;
  FeatureVector features;
};

struct FeatureRow {
  std::string subject_id;
  AgeGroup group = AgeGroup::YY;
  std::vector<std::optional<double>> values;
};

// Rows are kept sorted by subject_id.
struct FeatureTable {
  std::string name;  // "text", "list" or "textlist"
  std::vector<std::string> feature_names;
  std::vector<FeatureRow> rows;
};

struct FeatureTables {
  FeatureTable text;
  FeatureTable list;
  FeatureTable text_list;
  std::vector<std::string> warnings;  // subjects excluded from text_list
};

// DuplicateSubject if a (subject, task) pair repeats or a subject's group is
// inconsistent across tasks.
FeatureTables build_tables(std::span<const SubjectFeatures> features);

void write_table_csv(std::ostream& out, const FeatureTable& table);
FeatureTable read_table_csv(std::istream& in, const std::string& name);

struct TaskSpec {
  AgeGroup younger = AgeGroup::YY;
  AgeGroup older = AgeGroup::EE;

  std::string name() const;
  bool operator==(const TaskSpec&) const = default;
};

// YYvsEY, EYvsEF, EFvsEE, YYvsEE, EYvsEE.
std::vector<TaskSpec> default_tasks();
TaskSpec parse_task_spec(std::string_view name);

// Median imputation followed by per-column min-max scaling. A constant
// column maps to 0.
struct Scaling {
  std::vector<double> medians;
  std::vector<std::pair<double, double>> min_max;

  static Scaling fit(const std::vector<std::vector<std::optional<double>>>& raw,
                     std::span<const std::size_t> rows);
  Matrix transform(const std::vector<std::vector<std::optional<double>>>& raw,
                   std::span<const std::size_t> rows) const;
  Matrix inverse(const Matrix& x) const;
};

struct TaskDataset {
  std::string task_name;
  TaskSpec spec;
  std::vector<std::string> feature_names;
  std::vector<std::string> subject_ids;
  std::vector<AgeGroup> groups;
  std::vector<std::vector<std::optional<double>>> raw;  // unscaled, may hold gaps
  Matrix x;            // scaled to [0, 1]
  std::vector<int> y;  // 1 = older group
  Scaling scaling;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t dims() const noexcept { return feature_names.size(); }
};

TaskDataset make_task(const FeatureTable& table, const TaskSpec& spec);

void write_task_csv(std::ostream& out, const TaskDataset& ds);
void write_task_sidecar(std::ostream& out, const TaskDataset& ds, const std::string& dataset);

}  // namespace pentrace
