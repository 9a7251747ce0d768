#include "pentrace/explain.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

#include "pentrace/error.hpp"
#include "pentrace/numfmt.hpp"
#include "pentrace/parallel.hpp"
#include "pentrace/rng.hpp"

namespace pentrace {

double ShapModel::raw(std::span<const double> x) const {
  double sum = constant;
  for (const auto& c : components) sum += c.eval(x);
  return sum;
}

ShapModel shap_model(const Model& model) {
  ShapModel out;
  out.n_features = feature_count(model);
  if (const auto* lr = std::get_if<LogRegModel>(&model)) {
    out.constant = lr->bias;
    for (std::size_t j = 0; j < lr->weights.size(); ++j) {
      if (lr->weights[j] == 0.0) continue;
      const double w = lr->weights[j];
      out.components.push_back({{j}, [w, j](std::span<const double> x) { return w * x[j]; }});
    }
    return out;
  }
  const auto& gb = std::get<GbdtModel>(model);
  out.constant = gb.base_score;
  const auto used = std::min<std::size_t>(gb.trees.size(),
                                          static_cast<std::size_t>(gb.best_iteration));
  for (std::size_t t = 0; t < used; ++t) {
    const auto features = gb.trees[t].used_features();
    const double lr = gb.learning_rate;
    auto eval = [lr, tree = gb.trees[t]](std::span<const double> x) { return lr * tree.predict(x); };
    if (features.empty()) {
      // A stump with no split is a constant.
      out.constant += lr * gb.trees[t].nodes[0].value;
      continue;
    }
    out.components.push_back({std::vector<std::size_t>(features.begin(), features.end()),
                              std::move(eval)});
  }
  return out;
}

ShapModel shap_model(std::function<double(std::span<const double>)> f, std::size_t n_features) {
  ShapModel out;
  out.n_features = n_features;
  std::vector<std::size_t> all(n_features);
  std::iota(all.begin(), all.end(), std::size_t{0});
  out.components.push_back({std::move(all), std::move(f)});
  return out;
}

namespace {

void check_inputs(const ShapModel& model, const Matrix& x, const Matrix& background) {
  if (background.rows() == 0) throw Error(ErrorCode::InvalidArgument, "empty background");
  if (x.cols() != model.n_features || background.cols() != model.n_features) {
    throw Error(ErrorCode::DimensionMismatch, "feature count differs from model");
  }
}

// Mean of a component over the background with the features whose local
// bits are set in `mask` taken from the sample.
double coalition_value(const ShapComponent& c, std::span<const double> sample,
                       const Matrix& background, std::uint64_t mask, std::vector<double>& scratch) {
  double sum = 0.0;
  for (std::size_t b = 0; b < background.rows(); ++b) {
    const auto row = background.row(b);
    std::copy(row.begin(), row.end(), scratch.begin());
    for (std::size_t a = 0; a < c.support.size(); ++a) {
      if (mask >> a & 1U) scratch[c.support[a]] = sample[c.support[a]];
    }
    sum += c.eval(scratch);
  }
  return sum / static_cast<double>(background.rows());
}

double baseline_of(const ShapModel& model, const Matrix& background) {
  std::vector<double> scratch(model.n_features);
  double base = model.constant;
  const std::span<const double> unused;
  for (const auto& c : model.components) base += coalition_value(c, unused, background, 0, scratch);
  return base;
}

}  // namespace

ShapReport shapley_exact(const ShapModel& model, const Matrix& x, const Matrix& background,
                         int jobs) {
  if (model.n_features > kMaxExactFeatures) {
    throw Error(ErrorCode::TooManyFeaturesForExact,
                std::to_string(model.n_features) + " features exceeds exact limit");
  }
  check_inputs(model, x, background);

  std::array<double, kMaxExactFeatures + 1> fact{};
  fact[0] = 1.0;
  for (std::size_t i = 1; i < fact.size(); ++i) fact[i] = fact[i - 1] * static_cast<double>(i);

  ShapReport report;
  report.phi = Matrix(x.rows(), model.n_features);
  report.raw_output.resize(x.rows());
  report.baseline = baseline_of(model, background);

  parallel_for(x.rows(), jobs, [&](std::size_t i) {
    const auto sample = x.row(i);
    std::vector<double> scratch(model.n_features);
    std::vector<double> values;
    auto phi = report.phi.row(i);
    for (const auto& c : model.components) {
      const std::size_t k = c.support.size();
      const std::uint64_t full = std::uint64_t{1} << k;
      values.resize(full);
      for (std::uint64_t mask = 0; mask < full; ++mask) {
        values[mask] = coalition_value(c, sample, background, mask, scratch);
      }
      for (std::size_t a = 0; a < k; ++a) {
        const std::uint64_t bit = std::uint64_t{1} << a;
        double acc = 0.0;
        for (std::uint64_t mask = 0; mask < full; ++mask) {
          if (mask & bit) continue;
          const auto s = static_cast<std::size_t>(std::popcount(mask));
          const double weight = fact[s] * fact[k - s - 1] / fact[k];
          acc += weight * (values[mask | bit] - values[mask]);
        }
        phi[c.support[a]] += acc;
      }
    }
    report.raw_output[i] = model.raw(sample);
  });
  return report;
}

namespace {

// Lazily filled coalition values for one component and one sample.
class CoalitionCache {
 public:
  CoalitionCache(const ShapComponent& c, std::span<const double> sample, const Matrix& background,
                 std::vector<double>& scratch)
      : c_(c), sample_(sample), background_(background), scratch_(scratch) {
    if (c.support.size() <= kDenseBits) {
      dense_.assign(std::size_t{1} << c.support.size(), std::numeric_limits<double>::quiet_NaN());
    }
  }

  double operator()(std::uint64_t mask) {
    if (!dense_.empty()) {
      double& slot = dense_[mask];
      if (std::isnan(slot)) slot = coalition_value(c_, sample_, background_, mask, scratch_);
      return slot;
    }
    const auto it = sparse_.find(mask);
    if (it != sparse_.end()) return it->second;
    const double v = coalition_value(c_, sample_, background_, mask, scratch_);
    sparse_.emplace(mask, v);
    return v;
  }

 private:
  static constexpr std::size_t kDenseBits = 16;
  const ShapComponent& c_;
  std::span<const double> sample_;
  const Matrix& background_;
  std::vector<double>& scratch_;
  std::vector<double> dense_;
  std::unordered_map<std::uint64_t, double> sparse_;
};

}  // namespace

ShapReport shapley_sampled(const ShapModel& model, const Matrix& x, const Matrix& background,
                           int n_permutations, std::uint64_t seed, int jobs) {
  if (n_permutations < kMinPermutations) {
    throw Error(ErrorCode::InvalidArgument,
                "n_permutations must be at least " + std::to_string(kMinPermutations));
  }
  check_inputs(model, x, background);
  for (const auto& c : model.components) {
    if (c.support.size() > 64) throw Error(ErrorCode::InvalidArgument, "component too wide");
  }
  const std::size_t d = model.n_features;
  const std::size_t n_pairs = static_cast<std::size_t>(n_permutations + 1) / 2;

  // For each feature, the components reading it and its bit there.
  std::vector<std::vector<std::pair<std::size_t, std::uint64_t>>> owners(d);
  for (std::size_t ci = 0; ci < model.components.size(); ++ci) {
    const auto& support = model.components[ci].support;
    for (std::size_t a = 0; a < support.size(); ++a) {
      owners[support[a]].emplace_back(ci, std::uint64_t{1} << a);
    }
  }

  ShapReport report;
  report.phi = Matrix(x.rows(), d);
  report.std_err = Matrix(x.rows(), d);
  report.raw_output.resize(x.rows());
  report.baseline = baseline_of(model, background);

  parallel_for(x.rows(), jobs, [&](std::size_t i) {
    const auto sample = x.row(i);
    std::vector<double> scratch(d);
    std::vector<CoalitionCache> caches;
    caches.reserve(model.components.size());
    for (const auto& c : model.components) caches.emplace_back(c, sample, background, scratch);

    Rng rng(derive_seed(seed, i));
    std::vector<std::size_t> perm(d);
    std::vector<std::uint64_t> masks(model.components.size());
    std::vector<double> forward(d), backward(d);
    auto walk = [&](auto first, auto last, std::vector<double>& contrib) {
      std::fill(masks.begin(), masks.end(), 0);
      for (auto it = first; it != last; ++it) {
        double delta = 0.0;
        for (const auto& [ci, bit] : owners[*it]) {
          delta += caches[ci](masks[ci] | bit) - caches[ci](masks[ci]);
          masks[ci] |= bit;
        }
        contrib[*it] = delta;
      }
    };

    // Welford accumulators over antithetic pair means.
    std::vector<double> mean(d, 0.0), m2(d, 0.0);
    for (std::size_t p = 0; p < n_pairs; ++p) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(perm));
      walk(perm.begin(), perm.end(), forward);
      walk(perm.rbegin(), perm.rend(), backward);
      const double count = static_cast<double>(p + 1);
      for (std::size_t j = 0; j < d; ++j) {
        const double v = 0.5 * (forward[j] + backward[j]);
        const double diff = v - mean[j];
        mean[j] += diff / count;
        m2[j] += diff * (v - mean[j]);
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      report.phi(i, j) = mean[j];
      const double var = n_pairs > 1 ? m2[j] / static_cast<double>(n_pairs - 1) : 0.0;
      (*report.std_err)(i, j) = std::sqrt(var / static_cast<double>(n_pairs));
    }
    report.raw_output[i] = model.raw(sample);
  });
  return report;
}

std::vector<RankedFeature> rank_features(const ShapReport& report,
                                         std::span<const std::string> feature_names) {
  const std::size_t d = report.phi.cols();
  if (feature_names.size() != d) {
    throw Error(ErrorCode::DimensionMismatch, "feature names do not match phi columns");
  }
  const std::size_t n = report.phi.rows();
  std::vector<RankedFeature> out(d);
  std::vector<double> col(n);
  // Summing sorted values keeps the means independent of sample order.
  auto sorted_mean = [&](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double a : v) s += a;
    return n > 0 ? s / static_cast<double>(n) : 0.0;
  };
  for (std::size_t j = 0; j < d; ++j) {
    out[j].name = feature_names[j];
    out[j].index = j;
    for (std::size_t i = 0; i < n; ++i) col[i] = report.phi(i, j);
    out[j].mean_phi = sorted_mean(col);
    for (std::size_t i = 0; i < n; ++i) col[i] = std::abs(report.phi(i, j));
    out[j].mean_abs_phi = sorted_mean(col);
  }
  std::sort(out.begin(), out.end(), [](const RankedFeature& a, const RankedFeature& b) {
    if (a.mean_abs_phi != b.mean_abs_phi) return a.mean_abs_phi > b.mean_abs_phi;
    return a.name < b.name;
  });
  return out;
}

void write_shap_json(std::ostream& out, const ShapReport& report,
                     std::span<const std::string> feature_names,
                     std::span<const std::string> sample_ids) {
  nlohmann::ordered_json doc;
  doc["output_space"] = report.output_space;
  doc["estimator"] = report.std_err ? "sampled" : "exact";
  doc["baseline"] = report.baseline;
  doc["features"] = std::vector<std::string>(feature_names.begin(), feature_names.end());
  auto& ranking = doc["ranking"] = nlohmann::ordered_json::array();
  for (const auto& r : rank_features(report, feature_names)) {
    ranking.push_back(
        {{"feature", r.name}, {"mean_abs_phi", r.mean_abs_phi}, {"mean_phi", r.mean_phi}});
  }
  auto& samples = doc["samples"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < report.phi.rows(); ++i) {
    const auto phi = report.phi.row(i);
    nlohmann::ordered_json s;
    s["sample_id"] = sample_ids[i];
    s["raw_output"] = report.raw_output[i];
    s["phi"] = std::vector<double>(phi.begin(), phi.end());
    if (report.std_err) {
      const auto se = report.std_err->row(i);
      s["std_err"] = std::vector<double>(se.begin(), se.end());
    }
    samples.push_back(std::move(s));
  }
  out << doc.dump(2) << '\n';
}

void write_beeswarm_csv(std::ostream& out, const ShapReport& report, const Matrix& x,
                        std::span<const std::string> feature_names,
                        std::span<const std::string> sample_ids) {
  out << "feature,sample_id,feature_value,phi\n";
  for (const auto& r : rank_features(report, feature_names)) {
    for (std::size_t i = 0; i < report.phi.rows(); ++i) {
      out << r.name << ',' << sample_ids[i] << ',' << format_double(x(i, r.index)) << ','
          << format_double(report.phi(i, r.index)) << '\n';
    }
  }
}

}  // namespace pentrace
