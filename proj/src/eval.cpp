#include "pentrace/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "pentrace/error.hpp"
#include "pentrace/numfmt.hpp"
#include "pentrace/parallel.hpp"
#include "pentrace/rng.hpp"

namespace pentrace {

ConfusionMatrix confusion_at(std::span<const double> probs, std::span<const int> labels,
                             double threshold) {
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool predicted = probs[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? cm.tp : cm.fn) += 1;
    } else {
      (predicted ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

Metrics metrics_from_confusion(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorCode::InvalidArgument, "empty confusion matrix");
  Metrics m;
  const auto pct = [](std::size_t num, std::size_t den) {
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = pct(cm.tp + cm.tn, cm.total());
  if (cm.tp + cm.fp > 0) m.precision = pct(cm.tp, cm.tp + cm.fp);
  if (cm.tp + cm.fn > 0) m.recall = pct(cm.tp, cm.tp + cm.fn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  return m;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const std::size_t n = scores.size();
  if (labels.size() != n) throw Error(ErrorCode::DimensionMismatch, "scores/labels length");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the rank sum of positives, kept integral so that ties (half ranks)
  // stay exact.
  std::size_t twice_rank_sum = 0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const std::size_t twice_avg_rank = (i + 1) + (j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) {
        twice_rank_sum += twice_avg_rank;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw Error(ErrorCode::SingleClassInput, "ROC-AUC needs both classes");
  }
  // 2U = 2R - n_pos (n_pos + 1); AUC = U / (n_pos n_neg).
  const std::size_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return 100.0 * static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<std::size_t> inner_validation_rows(std::span<const std::size_t> train_rows,
                                               std::span<const int> labels, double fraction,
                                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> out;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t r : train_rows) {
      if (labels[r] == cls) members.push_back(r);
    }
    if (members.size() < 2) continue;
    const auto want = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(members.size()) + 0.5));
    const std::size_t take = std::clamp<std::size_t>(want, 1, members.size() - 1);
    rng.shuffle(std::span<std::size_t>(members));
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(out.begin(), out.end());
  return out;
}

int rounded_mean_iteration(std::span<const int> best_iterations) {
  if (best_iterations.empty()) return 1;
  const double sum = std::accumulate(best_iterations.begin(), best_iterations.end(), 0.0);
  const double mean = sum / static_cast<double>(best_iterations.size());
  return std::max(1, static_cast<int>(std::floor(mean + 0.5)));
}

EvalReport loo_cv(const TaskDataset& dataset, ModelKind kind, const TrainConfig& cfg,
                  const LooOptions& options) {
  const std::size_t n = dataset.size();
  if (n < 4) throw Error(ErrorCode::InsufficientRows, "LOO needs at least 4 rows");
  const auto n_pos = static_cast<std::size_t>(std::count(dataset.y.begin(), dataset.y.end(), 1));
  if (n_pos == 0 || n_pos == n) {
    throw Error(ErrorCode::SingleClassInput, "task " + dataset.task_name + " has one class only");
  }

  // Folds run over rows sorted by subject id, so the input row order cannot
  // influence seeds, inner splits or summation order.
  std::vector<std::size_t> canonical(n);
  std::iota(canonical.begin(), canonical.end(), std::size_t{0});
  std::sort(canonical.begin(), canonical.end(), [&](std::size_t a, std::size_t b) {
    return dataset.subject_ids[a] < dataset.subject_ids[b];
  });

  std::vector<double> probs(n, 0.0);
  std::vector<int> best(n, 0);
  parallel_for(n, options.jobs, [&](std::size_t fold) {
    const std::size_t held_out = canonical[fold];
    std::vector<std::size_t> train;
    train.reserve(n - 1);
    for (std::size_t r : canonical) {
      if (r != held_out) train.push_back(r);
    }
    const std::size_t test_row[] = {held_out};

    Matrix x_all;
    std::vector<std::size_t> rows_all;
    if (options.fold_safe_scaling) {
      const Scaling s = Scaling::fit(dataset.raw, train);
      rows_all = train;
      rows_all.push_back(held_out);
      x_all = s.transform(dataset.raw, rows_all);
    }
    // Local view: matrix of the given dataset rows under this fold's scaling.
    auto rows_matrix = [&](std::span<const std::size_t> rows) {
      if (!options.fold_safe_scaling) return dataset.x.select_rows(rows);
      std::vector<std::size_t> local;
      for (std::size_t r : rows) {
        local.push_back(static_cast<std::size_t>(
            std::find(rows_all.begin(), rows_all.end(), r) - rows_all.begin()));
      }
      return x_all.select_rows(local);
    };
    auto labels_of = [&](std::span<const std::size_t> rows) {
      std::vector<int> out;
      for (std::size_t r : rows) out.push_back(dataset.y[r]);
      return out;
    };

    const Matrix x_test = rows_matrix(test_row);
    if (kind == ModelKind::LogReg) {
      const Matrix x_train = rows_matrix(train);
      const auto y_train = labels_of(train);
      const LogRegModel model = train_logreg(x_train, y_train, cfg);
      probs[fold] = predict_proba(model, x_test)[0];
      best[fold] = model.n_iters;
      return;
    }
    const auto val_rows = inner_validation_rows(train, dataset.y, cfg.inner_val_fraction,
                                                derive_seed(cfg.seed, fold));
    std::vector<std::size_t> fit_rows;
    for (std::size_t r : train) {
      if (!std::binary_search(val_rows.begin(), val_rows.end(), r)) fit_rows.push_back(r);
    }
    const Matrix x_fit = rows_matrix(fit_rows);
    const auto y_fit = labels_of(fit_rows);
    const Matrix x_val = rows_matrix(val_rows);
    const auto y_val = labels_of(val_rows);
    std::optional<ValidationSet> validation;
    if (!val_rows.empty()) validation.emplace(ValidationSet{x_val, y_val});
    const GbdtModel model = train_gbdt(x_fit, y_fit, cfg, validation);
    probs[fold] = predict_proba(model, x_test)[0];
    best[fold] = model.best_iteration;
  });

  EvalReport report;
  report.task_name = dataset.task_name;
  report.model_kind = kind;
  report.per_sample.resize(n);
  std::vector<double> row_probs(n);
  for (std::size_t fold = 0; fold < n; ++fold) {
    const std::size_t r = canonical[fold];
    report.per_sample[r] = {dataset.subject_ids[r], dataset.y[r], probs[fold]};
    row_probs[r] = probs[fold];
  }
  report.best_iterations = best;
  report.confusion = confusion_at(row_probs, dataset.y);
  report.metrics = metrics_from_confusion(report.confusion);
  report.roc_auc = roc_auc(row_probs, dataset.y);
  report.mean_best_iteration = rounded_mean_iteration(best);
  return report;
}

Model final_fit(const TaskDataset& dataset, ModelKind kind, const TrainConfig& cfg, int rounds) {
  TrainConfig fixed = cfg;
  if (kind == ModelKind::LogReg) {
    fixed.logreg_max_iter = rounds;
    return train_logreg(dataset.x, dataset.y, fixed);
  }
  fixed.max_rounds = rounds;
  return train_gbdt(dataset.x, dataset.y, fixed);
}

namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string optional_cell(const std::optional<double>& v) {
  return v ? format_fixed(*v, 4) : std::string("NA");
}

}  // namespace

void write_report_json(std::ostream& out, const EvalReport& report) {
  nlohmann::ordered_json doc;
  doc["task"] = report.task_name;
  doc["dataset"] = report.dataset;
  doc["model"] = std::string(to_string(report.model_kind));
  doc["threshold"] = kDecisionThreshold;
  doc["confusion"] = {{"tp", report.confusion.tp},
                      {"fp", report.confusion.fp},
                      {"fn", report.confusion.fn},
                      {"tn", report.confusion.tn}};
  doc["metrics"] = {{"accuracy", report.metrics.accuracy},
                    {"precision", optional_json(report.metrics.precision)},
                    {"recall", optional_json(report.metrics.recall)},
                    {"f1", optional_json(report.metrics.f1)},
                    {"roc_auc", report.roc_auc}};
  doc["best_iterations"] = report.best_iterations;
  doc["mean_best_iteration"] = report.mean_best_iteration;
  auto& samples = doc["per_sample"] = nlohmann::ordered_json::array();
  for (const auto& s : report.per_sample) {
    samples.push_back(
        {{"subject_id", s.subject_id}, {"label", s.label}, {"probability", s.probability}});
  }
  out << doc.dump(2) << '\n';
}

EvalReport read_report_json(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
    EvalReport r;
    r.task_name = doc.at("task").get<std::string>();
    r.dataset = doc.at("dataset").get<std::string>();
    r.model_kind = parse_model_kind(doc.at("model").get<std::string>());
    const auto& cm = doc.at("confusion");
    r.confusion = {cm.at("tp").get<std::size_t>(), cm.at("fp").get<std::size_t>(),
                   cm.at("fn").get<std::size_t>(), cm.at("tn").get<std::size_t>()};
    const auto& m = doc.at("metrics");
    auto opt = [&](const char* key) -> std::optional<double> {
      const auto& v = m.at(key);
      if (v.is_null()) return std::nullopt;
      return v.get<double>();
    };
    r.metrics.accuracy = m.at("accuracy").get<double>();
    r.metrics.precision = opt("precision");
    r.metrics.recall = opt("recall");
    r.metrics.f1 = opt("f1");
    r.roc_auc = m.at("roc_auc").get<double>();
    r.best_iterations = doc.at("best_iterations").get<std::vector<int>>();
    r.mean_best_iteration = doc.at("mean_best_iteration").get<int>();
    for (const auto& s : doc.at("per_sample")) {
      r.per_sample.push_back({s.at("subject_id").get<std::string>(), s.at("label").get<int>(),
                              s.at("probability").get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("report JSON: ") + e.what());
  }
}

void write_metrics_header(std::ostream& out) {
  out << "model,dataset,task,n,tp,fp,fn,tn,accuracy,precision,recall,f1,roc_auc,"
         "mean_best_iteration\n";
}

void write_metrics_row(std::ostream& out, const EvalReport& r) {
  out << to_string(r.model_kind) << ',' << r.dataset << ',' << r.task_name << ','
      << r.confusion.total() << ',' << r.confusion.tp << ',' << r.confusion.fp << ','
      << r.confusion.fn << ',' << r.confusion.tn << ',' << format_fixed(r.metrics.accuracy, 4)
      << ',' << optional_cell(r.metrics.precision) << ',' << optional_cell(r.metrics.recall)
      << ',' << optional_cell(r.metrics.f1) << ',' << format_fixed(r.roc_auc, 4) << ','
      << r.mean_best_iteration << '\n';
}

}  // namespace pentrace
