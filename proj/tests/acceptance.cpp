// Acceptance checks; prints one PASS/FAIL line per criterion.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "pentrace/eval.hpp"
#include "pentrace/explain.hpp"
#include "pentrace/models.hpp"
#include "pentrace/pipeline.hpp"
#include "pentrace/tremor.hpp"

using namespace pentrace;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

double round1(double v) { return std::round(v * 10.0) / 10.0; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Outcome metric_identities() {
  struct Row {
    const char* task;
    ConfusionMatrix cm;
    double acc, prec, rec, f1;
  };
  const Row rows[] = {{"EYvsEF", {20, 4, 0, 16}, 90.0, 83.3, 100.0, 90.9},
                      {"EFvsEE", {17, 1, 3, 19}, 90.0, 94.4, 85.0, 89.5},
                      {"EYvsEE", {18, 1, 2, 19}, 92.5, 94.7, 90.0, 92.3},
                      {"YYvsEE", {20, 1, 0, 19}, 97.5, 95.2, 100.0, 97.6}};
  Outcome o;
  for (const auto& r : rows) {
    const auto m = metrics_from_confusion(r.cm);
    const bool ok = round1(m.accuracy) == r.acc && m.precision && round1(*m.precision) == r.prec &&
                    m.recall && round1(*m.recall) == r.rec && m.f1 && round1(*m.f1) == r.f1;
    o.require(ok, std::string("metrics differ for ") + r.task);
  }
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  std::mt19937_64 gen(2024);
  double worst = 0.0;
  for (int w = 0; w < 50; ++w) {
    const auto x = oracle::random_series(gen, 500);
    const auto want = oracle::rqa(x, 3, 2, 0.5, 2, kRqaEpsFloor);
    const auto got = rqa(x);
    worst = std::max({worst, std::abs(approximate_entropy(x) - oracle::apen(x, 2, 0.2)),
                      std::abs(got.rr - want.rr), std::abs(got.det - want.det)});
  }
  o.require(worst <= 1e-12, "ApEn/RQA deviation " + std::to_string(worst));

  std::uniform_int_distribution<int> level(0, 15);
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 4 + static_cast<std::size_t>(t);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(gen) / 15.0;
      y[i] = coin(gen);
    }
    y[0] = 0;
    y[1] = 1;
    o.require(roc_auc(s, y) == oracle::auc(s, y), "AUC mismatch on vector " + std::to_string(t));
  }
  return o;
}

Outcome numerical_checks() {
  Outcome o;
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd;
  auto random_xy = [&](std::size_t n, std::size_t d) {
    Matrix x(n, d);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double z = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        x(i, c) = u(gen);
        z += (c % 2 ? 1.0 : -1.0) * x(i, c);
      }
      y[i] = z + 0.4 * nd(gen) > 0.0 ? 1 : 0;
    }
    y[0] = 0;
    y[1] = 1;
    return std::pair{x, y};
  };

  const double h = 1e-5;
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto [x, y] = random_xy(30 + t, 2 + t % 6);
    std::vector<double> w(x.cols());
    for (auto& v : w) v = nd(gen);
    const double b = nd(gen), l2 = 1.0;
    const auto g = logreg_gradient(w, b, x, y, l2);
    for (std::size_t k = 0; k <= w.size(); ++k) {
      auto wp = w, wm = w;
      double bp = b, bm = b;
      if (k < w.size()) {
        wp[k] += h;
        wm[k] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double fd =
          (logreg_objective(wp, bp, x, y, l2) - logreg_objective(wm, bm, x, y, l2)) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[k]) / std::max(std::abs(fd), std::abs(g[k])));
    }
  }
  o.require(worst <= 1e-5, "gradient relative error " + std::to_string(worst));

  double recon = 0.0;
  for (int t = 0; t < 25; ++t) {
    const auto x = oracle::random_series(gen, 300 + 20 * static_cast<std::size_t>(t));
    const auto r = emd(x);
    double err = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double sum = r.residual[i];
      for (const auto& imf : r.imfs) sum += imf[i];
      err += (sum - x[i]) * (sum - x[i]);
      norm += x[i] * x[i];
    }
    recon = std::max(recon, std::sqrt(err / norm));
  }
  o.require(recon <= 1e-8, "EMD reconstruction error " + std::to_string(recon));

  for (int t = 0; t < 10; ++t) {
    const auto [x, y] = random_xy(50, 5);
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.max_rounds = 200;
    const auto curve = gbdt_training_curve(x, y, cfg);
    for (std::size_t r = 1; r < curve.size(); ++r) {
      o.require(curve[r] <= curve[r - 1], "GBDT loss rose at round " + std::to_string(r));
    }
  }
  return o;
}

Outcome spectral() {
  Outcome o;
  for (double f : {3.0, 8.0, 12.0}) {
    std::vector<double> x(500);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / 50.0);
    const HhtSpectrum one[] = {hht_spectrum(x)};
    const double got = modal_frequency(one);
    o.require(std::abs(got - f) <= 0.5, "tone " + std::to_string(f) + " Hz gave " + std::to_string(got));
  }
  return o;
}

Outcome shapley_axioms() {
  Outcome o;
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_matrix = [&](std::size_t n, std::size_t d) {
    Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) m(i, c) = u(gen);
    return m;
  };

  // f4 is a dummy and f0, f1 are symmetric when their values coincide.
  auto f = [](std::span<const double> v) {
    return std::tanh(v[0] + v[1]) * v[2] + v[0] * v[1] - 0.5 * v[3];
  };
  Matrix bg = random_matrix(12, 5), x = random_matrix(8, 5);
  for (Matrix* m : {&bg, &x})
    for (std::size_t i = 0; i < m->rows(); ++i) (*m)(i, 1) = (*m)(i, 0);
  const auto r = shapley_exact(shap_model(f, 5), x, bg);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double sum = r.baseline;
    for (std::size_t c = 0; c < 5; ++c) sum += r.phi(i, c);
    o.require(std::abs(sum - r.raw_output[i]) <= 1e-6, "efficiency");
    o.require(std::abs(r.phi(i, 4)) <= 1e-9, "dummy");
    o.require(std::abs(r.phi(i, 0) - r.phi(i, 1)) <= 1e-9, "symmetry");
  }

  const Matrix train = random_matrix(100, 8);
  std::vector<int> y(100);
  for (std::size_t i = 0; i < 100; ++i) y[i] = train(i, 0) + train(i, 1) * train(i, 2) > 0.8;
  y[0] = 0;
  y[1] = 1;
  TrainConfig cfg;
  cfg.max_rounds = 60;
  const auto gb = train_gbdt(train, y, cfg);
  const auto model = shap_model([&](std::span<const double> v) { return gb.raw_score(v); }, 8);
  const Matrix bg8 = random_matrix(10, 8), x8 = random_matrix(6, 8);
  const auto exact = shapley_exact(model, x8, bg8);
  const auto sampled = shapley_sampled(model, x8, bg8, 500, 31);
  for (std::size_t i = 0; i < x8.rows(); ++i) {
    for (std::size_t c = 0; c < 8; ++c) {
      const double gap = std::abs(sampled.phi(i, c) - exact.phi(i, c));
      o.require(gap <= 3.0 * (*sampled.std_err)(i, c) + 1e-9,
                "sampled phi outside 3 SE at (" + std::to_string(i) + "," + std::to_string(c) + ")");
    }
  }
  return o;
}

RunConfig default_run(const fs::path& dir, int jobs) {
  RunConfig cfg;
  cfg.run_dir = dir;
  cfg.set_seed(42);
  cfg.jobs = jobs;
  return cfg;
}

void full_pipeline(const RunConfig& cfg) {
  fs::remove_all(cfg.run_dir);
  cmd_synth(cfg);
  cmd_extract(cfg);
  cmd_dataset(cfg);
  cmd_train_eval(cfg);
  cmd_explain(cfg);
  cmd_report(cfg);
}

Outcome synthetic_reproduction(const fs::path& run) {
  Outcome o;
  std::map<std::string, double> gbdt, lr;
  for (const auto& spec : default_tasks()) {
    for (ModelKind kind : {ModelKind::Gbdt, ModelKind::LogReg}) {
      std::ifstream in(RunLayout{run}.report(kind, "text", spec.name()));
      const auto r = read_report_json(in);
      (kind == ModelKind::Gbdt ? gbdt : lr)[spec.name()] = r.roc_auc;
    }
  }
  std::ostringstream summary;
  int wins = 0;
  for (const auto& [task, auc] : gbdt) {
    summary << task << " " << auc << "/" << lr[task] << " ";
    wins += auc >= lr[task];
  }
  o.require(gbdt["YYvsEE"] >= 95.0, "far task AUC " + std::to_string(gbdt["YYvsEE"]));
  for (const char* t : {"YYvsEY", "EYvsEF", "EFvsEE"}) {
    o.require(gbdt[t] >= 80.0, std::string("adjacent task ") + t + " AUC " + std::to_string(gbdt[t]));
  }
  o.require(wins >= 4, "GBDT >= LR on only " + std::to_string(wins) + " tasks");

  std::ifstream shap(RunLayout{run}.explain() / "text_EFvsEE_shap.json");
  const auto doc = nlohmann::json::parse(shap);
  std::vector<std::string> top;
  for (std::size_t k = 0; k < 3 && k < doc["ranking"].size(); ++k) {
    top.push_back(doc["ranking"][k]["feature"].get<std::string>());
  }
  summary << "top3 EFvsEE:";
  for (const auto& t : top) summary << " " << t;
  o.require(std::find(top.begin(), top.end(), "InAir") != top.end(), "InAir not in top 3");
  if (o.pass) o.detail = summary.str();
  else o.detail += " (" + summary.str() + ")";
  return o;
}

Outcome determinism(const fs::path& a, const fs::path& b) {
  Outcome o;
  const RunLayout la{a}, lb{b};
  o.require(slurp(la.metrics()) == slurp(lb.metrics()), "metrics.csv differs");
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(la.explain())) {
    const auto other = lb.explain() / entry.path().filename();
    o.require(fs::exists(other) && slurp(entry.path()) == slurp(other),
              entry.path().filename().string() + " differs");
    ++files;
  }
  std::size_t files_b = 0;
  for ([[maybe_unused]] const auto& entry : fs::directory_iterator(lb.explain())) ++files_b;
  o.require(files > 0 && files == files_b, "explanation file sets differ");
  if (o.pass) o.detail = std::to_string(files) + " explanation files and metrics.csv identical";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "pentrace_acceptance";
  fs::create_directories(root);

  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const int jobs = static_cast<int>(std::max(2u, std::thread::hardware_concurrency()));
  const fs::path run_a = root / "run_jobs1", run_b = root / "run_jobsN";
  bool pipelines_ok = true;
  std::string pipeline_error;
  auto ensure_runs = [&, done = false]() mutable {
    if (done) return;
    done = true;
    try {
      full_pipeline(default_run(run_a, 1));
      full_pipeline(default_run(run_b, jobs));
    } catch (const std::exception& e) {
      pipelines_ok = false;
      pipeline_error = e.what();
    }
  };
  auto guarded = [&](auto&& body) {
    ensure_runs();
    if (!pipelines_ok) return Outcome{false, "pipeline failed: " + pipeline_error};
    return body();
  };

  const Criterion criteria[] = {
      {"metric identities vs published confusion matrices", metric_identities},
      {"oracle equivalence (ApEn, RQA, ROC-AUC)", oracle_equivalence},
      {"numerical checks (gradient, EMD, GBDT loss)", numerical_checks},
      {"spectral correctness of modal frequency", spectral},
      {"Shapley axioms and sampled estimator", shapley_axioms},
      {"synthetic end-to-end result structure", [&] { return guarded([&] { return synthetic_reproduction(run_a); }); }},
      {"determinism across full runs", [&] { return guarded([&] { return determinism(run_a, run_b); }); }},
  };

  int failures = 0;
  int index = 1;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << index++ << "] " << c.name;
    if (!o.detail.empty()) std::cout << ": " << o.detail;
    std::cout << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
