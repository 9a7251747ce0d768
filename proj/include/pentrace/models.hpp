#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pentrace/matrix.hpp"

namespace pentrace {

struct TrainConfig {
  // Gradient-boosted trees.
  int max_rounds = 500;
  int early_stopping_rounds = 20;
  int depth = 4;
  double learning_rate = 0.1;
  double l2_leaf = 3.0;
  double inner_val_fraction = 0.2;
  std::uint64_t seed = 42;
  // Logistic regression.
  double logreg_l2 = 1.0;
  int logreg_max_iter = 10000;
  double logreg_tol = 1e-6;
};

struct LogRegModel {
  std::vector<double> weights;
  double bias = 0.0;
  double l2 = 1.0;
  int n_iters = 0;
};

// Objective: sum of per-sample log-losses plus l2/2 * |w|^2 (bias unpenalised).
double logreg_objective(std::span<const double> weights, double bias, const Matrix& x,
                        std::span<const int> y, double l2);

// Gradient of logreg_objective; the last entry is d/d(bias).
std::vector<double> logreg_gradient(std::span<const double> weights, double bias,
                                    const Matrix& x, std::span<const int> y, double l2);

// Full-batch gradient descent with backtracking line search.
LogRegModel train_logreg(const Matrix& x, std::span<const int> y, const TrainConfig& cfg = {});

struct TreeNode {
  int feature = -1;        // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] < threshold
  int left = -1;
  int right = -1;
  double value = 0.0;      // leaf weight
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
  std::vector<int> used_features() const;  // sorted, unique
};

struct GbdtModel {
  std::vector<RegressionTree> trees;
  double learning_rate = 0.1;
  double base_score = 0.0;  // prior log-odds
  int best_iteration = 0;   // number of leading trees used for prediction
  std::size_t n_features = 0;

  // base_score + learning_rate * sum of the first best_iteration trees.
  double raw_score(std::span<const double> x) const;
  GbdtModel truncated() const;
};

struct ValidationSet {
  const Matrix& x;
  std::span<const int> y;
};

// Logistic-loss boosting; each round fits one depth-limited tree to the
// gradients with Newton leaf weights. With a validation set, training stops
// once validation loss has not improved for early_stopping_rounds rounds.
GbdtModel train_gbdt(const Matrix& x, std::span<const int> y, const TrainConfig& cfg = {},
                     std::optional<ValidationSet> validation = std::nullopt);

// Per-round training loss, recorded for monotonicity checks.
std::vector<double> gbdt_training_curve(const Matrix& x, std::span<const int> y,
                                        const TrainConfig& cfg);

double mean_log_loss(std::span<const double> raw_scores, std::span<const int> y);

using Model = std::variant<LogRegModel, GbdtModel>;

enum class ModelKind { LogReg, Gbdt };
std::string_view to_string(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view text);

std::size_t feature_count(const Model& model);
double raw_score(const Model& model, std::span<const double> x);
std::vector<double> predict_proba(const Model& model, const Matrix& x);

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

void save_model(std::ostream& out, const Model& model);
Model load_model(std::istream& in);

}  // namespace pentrace
