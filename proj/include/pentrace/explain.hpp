#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pentrace/matrix.hpp"
#include "pentrace/models.hpp"

namespace pentrace {

// A model written as constant + sum of components, each reading only the
// features in its support. Shapley values are additive over components, so
// coalitions only need enumerating over each support.
struct ShapComponent {
  std::vector<std::size_t> support;  // sorted feature indices
  std::function<double(std::span<const double>)> eval;
};

struct ShapModel {
  std::size_t n_features = 0;
  double constant = 0.0;
  std::vector<ShapComponent> components;

  double raw(std::span<const double> x) const;
};

// GBDT: one component per used tree; logistic regression: one per weight.
ShapModel shap_model(const Model& model);
// Opaque function: a single component over every feature.
ShapModel shap_model(std::function<double(std::span<const double>)> f, std::size_t n_features);

inline constexpr std::size_t kMaxExactFeatures = 15;
inline constexpr int kMinPermutations = 100;

struct ShapReport {
  std::string output_space = "log_odds";
  double baseline = 0.0;
  Matrix phi;                     // samples x features
  std::optional<Matrix> std_err;  // sampled estimator only
  std::vector<double> raw_output;
};

// Interventional values: v(S) averages the model over background rows with
// the features in S taken from the sample.
ShapReport shapley_exact(const ShapModel& model, const Matrix& x, const Matrix& background,
                         int jobs = 1);

// Antithetic permutation sampling (each permutation is paired with its
// reverse); every sample draws from its own seeded stream.
ShapReport shapley_sampled(const ShapModel& model, const Matrix& x, const Matrix& background,
                           int n_permutations, std::uint64_t seed, int jobs = 1);

struct RankedFeature {
  std::string name;
  std::size_t index = 0;
  double mean_abs_phi = 0.0;
  double mean_phi = 0.0;
};

// Descending mean |phi|, ties alphabetical.
std::vector<RankedFeature> rank_features(const ShapReport& report,
                                         std::span<const std::string> feature_names);

void write_shap_json(std::ostream& out, const ShapReport& report,
                     std::span<const std::string> feature_names,
                     std::span<const std::string> sample_ids);

// feature,sample_id,feature_value,phi with features in ranking order.
void write_beeswarm_csv(std::ostream& out, const ShapReport& report, const Matrix& x,
                        std::span<const std::string> feature_names,
                        std::span<const std::string> sample_ids);

}  // namespace pentrace
