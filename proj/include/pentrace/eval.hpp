#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pentrace/dataset.hpp"
#include "pentrace/models.hpp"

namespace pentrace {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

inline constexpr double kDecisionThreshold = 0.5;

ConfusionMatrix confusion_at(std::span<const double> probs, std::span<const int> labels,
                             double threshold = kDecisionThreshold);

// Percentages; a ratio with a zero denominator is left empty.
struct Metrics {
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

Metrics metrics_from_confusion(const ConfusionMatrix& cm);

// Mann-Whitney AUC in percent: P(s+ > s-) + P(s+ == s-)/2.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct SamplePrediction {
  std::string subject_id;
  int label = 0;
  double probability = 0.0;
};

struct EvalReport {
  std::string task_name;
  std::string dataset;
  ModelKind model_kind = ModelKind::Gbdt;
  std::vector<SamplePrediction> per_sample;  // dataset row order
  ConfusionMatrix confusion;
  Metrics metrics;
  double roc_auc = 0.0;
  std::vector<int> best_iterations;  // fold order (GD iterations for logreg)
  int mean_best_iteration = 1;
};

struct LooOptions {
  bool fold_safe_scaling = false;
  int jobs = 1;
};

// Stratified inner validation rows for early stopping, chosen from
// `train_rows` (indices into the dataset) with a seeded shuffle per class.
std::vector<std::size_t> inner_validation_rows(std::span<const std::size_t> train_rows,
                                               std::span<const int> labels, double fraction,
                                               std::uint64_t seed);

EvalReport loo_cv(const TaskDataset& dataset, ModelKind kind, const TrainConfig& cfg,
                  const LooOptions& options = {});

// Half-up rounding of the mean, never below 1.
int rounded_mean_iteration(std::span<const int> best_iterations);

// Refit on every row for exactly `rounds` rounds (GBDT) or iterations
// (logistic regression), without early stopping.
Model final_fit(const TaskDataset& dataset, ModelKind kind, const TrainConfig& cfg, int rounds);

void write_report_json(std::ostream& out, const EvalReport& report);
EvalReport read_report_json(std::istream& in);

// Header line and one row per report.
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const EvalReport& report);

}  // namespace pentrace
