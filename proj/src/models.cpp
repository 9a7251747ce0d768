#include "pentrace/models.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "pentrace/error.hpp"

namespace pentrace {

namespace {

using json = nlohmann::json;

constexpr int kModelFormatVersion = 1;

void check_training_input(const Matrix& x, std::span<const int> y) {
  if (x.rows() != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, "row count differs from label count");
  }
  std::size_t pos = 0;
  for (int v : y) {
    if (v != 0 && v != 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    pos += static_cast<std::size_t>(v);
  }
  if (y.size() < 2 || pos == 0 || pos == y.size()) {
    throw Error(ErrorCode::SingleClassInput, "training data must contain both classes");
  }
}

// log(1 + e^z) - y z, stable for large |z|.
double log_loss_term(double z, int y) {
  const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - (y ? z : 0.0);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// ---------------------------------------------------------------------------
// Tree growing

struct GradPair {
  double g;
  double h;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<GradPair>& grad, int max_depth, double l2)
      : x_(x), grad_(grad), max_depth_(max_depth), l2_(l2) {}

  RegressionTree build(const std::vector<std::size_t>& rows) {
    tree_.nodes.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    double gain = -std::numeric_limits<double>::infinity();
    int feature = -1;
    double threshold = 0.0;
  };

  int grow(const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double g = 0.0, h = 0.0;
    for (std::size_t r : rows) {
      g += grad_[r].g;
      h += grad_[r].h;
    }
    const Split split = depth < max_depth_ ? best_split(rows, g, h) : Split{};
    if (split.feature < 0) {
      tree_.nodes[static_cast<std::size_t>(id)].value = -g / (h + l2_);
      return id;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (x_(r, static_cast<std::size_t>(split.feature)) < split.threshold ? left : right).push_back(r);
    }
    const int l = grow(left, depth + 1);
    const int rt = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = rt;
    return id;
  }

  // Exhaustive scan over midpoints between consecutive distinct values.
  // Strict improvement keeps the lowest feature index, then lowest threshold.
  Split best_split(const std::vector<std::size_t>& rows, double g_total, double h_total) {
    Split best;
    const double parent = g_total * g_total / (h_total + l2_);
    std::vector<std::size_t> order(rows);
    for (std::size_t f = 0; f < x_.cols(); ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return x_(a, f) < x_(b, f); });
      double gl = 0.0, hl = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        gl += grad_[order[i]].g;
        hl += grad_[order[i]].h;
        const double lo = x_(order[i], f);
        const double hi = x_(order[i + 1], f);
        if (!(lo < hi)) continue;
        const double gr = g_total - gl;
        const double hr = h_total - hl;
        const double gain = gl * gl / (hl + l2_) + gr * gr / (hr + l2_) - parent;
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (lo + hi);
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<GradPair>& grad_;
  int max_depth_;
  double l2_;
  RegressionTree tree_;
};

using RoundObserver = std::function<void(int round, std::span<const double> train_raw)>;

GbdtModel boost(const Matrix& x, std::span<const int> y, const TrainConfig& cfg,
                std::optional<ValidationSet> validation, const RoundObserver& observe) {
  check_training_input(x, y);
  if (validation && validation->x.cols() != x.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "validation feature count differs");
  }
  if (cfg.learning_rate <= 0.0 || cfg.depth < 0 || cfg.max_rounds < 0) {
    throw Error(ErrorCode::InvalidArgument, "invalid boosting configuration");
  }
  const std::size_t n = x.rows();
  const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double prior = pos / static_cast<double>(n);

  GbdtModel model;
  model.learning_rate = cfg.learning_rate;
  model.base_score = std::log(prior / (1.0 - prior));
  model.n_features = x.cols();

  std::vector<double> raw(n, model.base_score);
  std::vector<double> val_raw(validation ? validation->x.rows() : 0, model.base_score);
  std::vector<GradPair> grad(n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  TreeBuilder builder(x, grad, cfg.depth, cfg.l2_leaf);

  double best_loss = std::numeric_limits<double>::infinity();
  int best_round = 0;
  if (observe) observe(0, raw);
  for (int round = 1; round <= cfg.max_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(raw[i]);
      grad[i] = {p - static_cast<double>(y[i]), p * (1.0 - p)};
    }
    RegressionTree tree = builder.build(all);
    for (std::size_t i = 0; i < n; ++i) raw[i] += cfg.learning_rate * tree.predict(x.row(i));
    for (std::size_t i = 0; i < val_raw.size(); ++i) {
      val_raw[i] += cfg.learning_rate * tree.predict(validation->x.row(i));
    }
    model.trees.push_back(std::move(tree));
    if (observe) observe(round, raw);

    if (validation) {
      const double loss = mean_log_loss(val_raw, validation->y);
      if (loss < best_loss) {
        best_loss = loss;
        best_round = round;
      } else if (round - best_round >= cfg.early_stopping_rounds) {
        break;
      }
    }
  }
  model.best_iteration = validation ? best_round : static_cast<int>(model.trees.size());
  return model;
}

json tree_to_json(const RegressionTree& tree, int id) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
  if (node.feature < 0) return {{"leaf", node.value}};
  return {{"split",
           {{"feature", node.feature},
            {"threshold", node.threshold},
            {"left", tree_to_json(tree, node.left)},
            {"right", tree_to_json(tree, node.right)}}}};
}

int tree_from_json(RegressionTree& tree, const json& j) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("leaf")) {
    tree.nodes.back().value = j.at("leaf").get<double>();
    return id;
  }
  const json& s = j.at("split");
  const int feature = s.at("feature").get<int>();
  const double threshold = s.at("threshold").get<double>();
  const int left = tree_from_json(tree, s.at("left"));
  const int right = tree_from_json(tree, s.at("right"));
  auto& node = tree.nodes[static_cast<std::size_t>(id)];
  node.feature = feature;
  node.threshold = threshold;
  node.left = left;
  node.right = right;
  return id;
}

}  // namespace

double logreg_objective(std::span<const double> weights, double bias, const Matrix& x,
                        std::span<const int> y, double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    loss += log_loss_term(dot(weights, x.row(i)) + bias, y[i]);
  }
  return loss + 0.5 * l2 * dot(weights, weights);
}

std::vector<double> logreg_gradient(std::span<const double> weights, double bias,
                                    const Matrix& x, std::span<const int> y, double l2) {
  const std::size_t d = weights.size();
  std::vector<double> grad(d + 1, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    const double r = sigmoid(dot(weights, row) + bias) - static_cast<double>(y[i]);
    for (std::size_t j = 0; j < d; ++j) grad[j] += r * row[j];
    grad[d] += r;
  }
  for (std::size_t j = 0; j < d; ++j) grad[j] += l2 * weights[j];
  return grad;
}

LogRegModel train_logreg(const Matrix& x, std::span<const int> y, const TrainConfig& cfg) {
  check_training_input(x, y);
  const std::size_t d = x.cols();
  LogRegModel model;
  model.l2 = cfg.logreg_l2;
  model.weights.assign(d, 0.0);

  std::vector<double> trial_w(d);
  double loss = logreg_objective(model.weights, model.bias, x, y, model.l2);
  double step = 1.0;
  int iter = 0;
  for (; iter < cfg.logreg_max_iter; ++iter) {
    const auto grad = logreg_gradient(model.weights, model.bias, x, y, model.l2);
    double inf_norm = 0.0;
    double sq_norm = 0.0;
    for (double g : grad) {
      inf_norm = std::max(inf_norm, std::abs(g));
      sq_norm += g * g;
    }
    if (inf_norm <= cfg.logreg_tol) break;

    // Armijo backtracking; the accepted step seeds the next search (doubled).
    step *= 2.0;
    double trial_b = 0.0;
    double trial_loss = 0.0;
    while (true) {
      for (std::size_t j = 0; j < d; ++j) trial_w[j] = model.weights[j] - step * grad[j];
      trial_b = model.bias - step * grad[d];
      trial_loss = logreg_objective(trial_w, trial_b, x, y, model.l2);
      if (trial_loss <= loss - 0.5 * step * sq_norm || step < 1e-20) break;
      step *= 0.5;
    }
    if (!(trial_loss < loss)) break;  // no further progress representable
    model.weights = trial_w;
    model.bias = trial_b;
    loss = trial_loss;
  }
  model.n_iters = iter;
  return model;
}

double RegressionTree::predict(std::span<const double> x) const {
  std::size_t id = 0;
  while (nodes[id].feature >= 0) {
    const TreeNode& n = nodes[id];
    id = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left
                                                                                      : n.right);
  }
  return nodes[id].value;
}

std::vector<int> RegressionTree::used_features() const {
  std::vector<int> out;
  for (const auto& n : nodes) {
    if (n.feature >= 0) out.push_back(n.feature);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double GbdtModel::raw_score(std::span<const double> x) const {
  double sum = 0.0;
  const auto used = std::min<std::size_t>(trees.size(), static_cast<std::size_t>(best_iteration));
  for (std::size_t t = 0; t < used; ++t) sum += trees[t].predict(x);
  return base_score + learning_rate * sum;
}

GbdtModel GbdtModel::truncated() const {
  GbdtModel out = *this;
  out.trees.resize(std::min<std::size_t>(trees.size(), static_cast<std::size_t>(best_iteration)));
  return out;
}

GbdtModel train_gbdt(const Matrix& x, std::span<const int> y, const TrainConfig& cfg,
                     std::optional<ValidationSet> validation) {
  return boost(x, y, cfg, validation, {});
}

std::vector<double> gbdt_training_curve(const Matrix& x, std::span<const int> y,
                                        const TrainConfig& cfg) {
  std::vector<double> curve;
  boost(x, y, cfg, std::nullopt,
        [&](int, std::span<const double> raw) { curve.push_back(mean_log_loss(raw, y)); });
  return curve;
}

double mean_log_loss(std::span<const double> raw_scores, std::span<const int> y) {
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sum += log_loss_term(raw_scores[i], y[i]);
  return sum / static_cast<double>(y.size());
}

std::string_view to_string(ModelKind kind) noexcept {
  return kind == ModelKind::LogReg ? "logreg" : "gbdt";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "logreg") return ModelKind::LogReg;
  if (text == "gbdt") return ModelKind::Gbdt;
  throw Error(ErrorCode::InvalidArgument, "unknown model kind '" + std::string(text) + "'");
}

std::size_t feature_count(const Model& model) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LogRegModel>) {
          return m.weights.size();
        } else {
          return m.n_features;
        }
      },
      model);
}

double raw_score(const Model& model, std::span<const double> x) {
  if (x.size() != feature_count(model)) {
    throw Error(ErrorCode::DimensionMismatch, "feature count does not match the model");
  }
  return std::visit(
      [&](const auto& m) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LogRegModel>) {
          return dot(m.weights, x) + m.bias;
        } else {
          return m.raw_score(x);
        }
      },
      model);
}

std::vector<double> predict_proba(const Model& model, const Matrix& x) {
  if (x.cols() != feature_count(model)) {
    throw Error(ErrorCode::DimensionMismatch, "feature count does not match the model");
  }
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = sigmoid(raw_score(model, x.row(i)));
  return out;
}

void save_model(std::ostream& out, const Model& model) {
  json doc;
  doc["format"] = "pentrace-model";
  doc["version"] = kModelFormatVersion;
  if (const auto* lr = std::get_if<LogRegModel>(&model)) {
    doc["kind"] = "logreg";
    doc["weights"] = lr->weights;
    doc["bias"] = lr->bias;
    doc["l2"] = lr->l2;
    doc["n_iters"] = lr->n_iters;
  } else {
    const auto& gb = std::get<GbdtModel>(model);
    doc["kind"] = "gbdt";
    doc["learning_rate"] = gb.learning_rate;
    doc["base_score"] = gb.base_score;
    doc["best_iteration"] = gb.best_iteration;
    doc["n_features"] = gb.n_features;
    json trees = json::array();
    for (const auto& t : gb.trees) trees.push_back(tree_to_json(t, 0));
    doc["trees"] = std::move(trees);
  }
  out << doc.dump() << '\n';
}

Model load_model(std::istream& in) {
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != "pentrace-model") {
      throw Error(ErrorCode::MalformedInput, "not a pentrace model file");
    }
    if (doc.at("version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::MalformedInput, "unsupported model format version");
    }
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "logreg") {
      LogRegModel m;
      m.weights = doc.at("weights").get<std::vector<double>>();
      m.bias = doc.at("bias").get<double>();
      m.l2 = doc.at("l2").get<double>();
      m.n_iters = doc.at("n_iters").get<int>();
      return m;
    }
    if (kind == "gbdt") {
      GbdtModel m;
      m.learning_rate = doc.at("learning_rate").get<double>();
      m.base_score = doc.at("base_score").get<double>();
      m.best_iteration = doc.at("best_iteration").get<int>();
      m.n_features = doc.at("n_features").get<std::size_t>();
      for (const auto& t : doc.at("trees")) {
        RegressionTree tree;
        tree_from_json(tree, t);
        m.trees.push_back(std::move(tree));
      }
      return m;
    }
    throw Error(ErrorCode::MalformedInput, "unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("bad model file: ") + e.what());
  }
}

}  // namespace pentrace
