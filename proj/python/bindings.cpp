#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pentrace/config.hpp"
#include "pentrace/error.hpp"
#include "pentrace/eval.hpp"
#include "pentrace/explain.hpp"
#include "pentrace/features.hpp"
#include "pentrace/pipeline.hpp"
#include "pentrace/synth.hpp"

namespace py = pybind11;
using namespace pentrace;

namespace {

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  Matrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw Error(ErrorCode::DimensionMismatch, "ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = rows[i][c];
  }
  return m;
}

std::vector<std::vector<double>> to_rows(const Matrix& m) {
  std::vector<std::vector<double>> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i].assign(m.row(i).begin(), m.row(i).end());
  return out;
}

py::dict recording_dict(const PenRecording& rec) {
  py::dict d;
  d["t"] = rec.t;
  d["accel"] = rec.accel;
  d["gyro"] = rec.gyro;
  d["force"] = rec.force;
  d["sample_rate"] = rec.sample_rate;
  d["subject_id"] = rec.subject_id;
  d["task"] = std::string(to_string(rec.task));
  d["age_group"] = rec.age_group ? py::cast(std::string(to_string(*rec.age_group))) : py::none();
  return d;
}

py::dict feature_dict(const FeatureVector& fv) {
  py::dict d;
  for (std::size_t i = 0; i < kNumIndicators; ++i) {
    const auto& v = fv.values[i];
    d[py::str(std::string(kIndicatorNames[i]))] = v ? py::cast(*v) : py::none();
  }
  return d;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["f1"] = m.f1;
  return d;
}

py::dict shap_dict(const ShapReport& r) {
  py::dict d;
  d["output_space"] = r.output_space;
  d["baseline"] = r.baseline;
  d["phi"] = to_rows(r.phi);
  d["std_err"] = r.std_err ? py::cast(to_rows(*r.std_err)) : py::none();
  d["raw_output"] = r.raw_output;
  return d;
}

RunConfig make_config(const std::filesystem::path& run_dir, std::optional<std::uint64_t> seed,
                      int jobs, const std::optional<std::filesystem::path>& config,
                      const std::map<std::string, std::string>& overrides) {
  RunConfig cfg;
  if (config) apply_config_file(cfg, *config);
  for (const auto& [k, v] : overrides) set_config_value(cfg, k, v);
  if (seed) cfg.set_seed(*seed);
  if (jobs < 1) throw Error(ErrorCode::ConfigInvalid, "jobs must be >= 1");
  cfg.jobs = jobs;
  cfg.run_dir = run_dir;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Smart-pen handwriting pipeline";
  m.attr("__version__") = kToolVersion;

  // Leaked on purpose: the type must outlive interpreter teardown.
  static const py::handle error_type = py::exception<Error>(m, "PentraceError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const auto exc =
          py::reinterpret_borrow<py::object>(error_type)(std::string(to_string(e.code())), e.what());
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("load_recording", [](const std::string& path) { return recording_dict(load_recording_file(path)); },
        py::arg("path"), "Load and validate a CSV or JSON recording.");

  m.def("extract_features",
        [](const std::string& path) {
          const auto rec = load_recording_file(path);
          FeatureVector fv;
          {
            py::gil_scoped_release release;
            fv = extract_features(rec);
          }
          return feature_dict(fv);
        },
        py::arg("path"), "The 14 indicators of one recording; undefined values are None.");

  m.def("indicator_names", [] {
    std::vector<std::string> out(kIndicatorNames.begin(), kIndicatorNames.end());
    return out;
  });

  m.def("metrics_from_confusion",
        [](std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
          return metrics_dict(metrics_from_confusion({tp, fp, fn, tn}));
        },
        py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"));

  m.def("roc_auc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
          return roc_auc(scores, labels);
        },
        py::arg("scores"), py::arg("labels"), "Mann-Whitney AUC in percent.");

  m.def("generate_subject",
        [](const std::string& group, const std::string& task, double duration, std::uint64_t seed,
           double sample_rate) {
          const auto cfg = CohortConfig::defaults();
          const auto g = parse_group(group);
          auto gen = generate_subject(cfg.effective(g), parse_task(task), duration, sample_rate, seed);
          gen.recording.age_group = g;
          return recording_dict(gen.recording);
        },
        py::arg("group"), py::arg("task") = "Text", py::arg("duration") = 40.0,
        py::arg("seed") = 42, py::arg("sample_rate") = 50.0,
        "One synthetic recording from the default archetype of an age group.");

  m.def("shapley",
        [](const std::function<double(std::vector<double>)>& f, std::size_t n_features,
           const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& background,
           std::optional<int> permutations, std::uint64_t seed) {
          const auto model = shap_model(
              [f](std::span<const double> v) { return f(std::vector<double>(v.begin(), v.end())); },
              n_features);
          const Matrix xm = to_matrix(x), bg = to_matrix(background);
          return shap_dict(permutations ? shapley_sampled(model, xm, bg, *permutations, seed)
                                        : shapley_exact(model, xm, bg));
        },
        py::arg("f"), py::arg("n_features"), py::arg("x"), py::arg("background"),
        py::arg("permutations") = py::none(), py::arg("seed") = 42,
        "Interventional Shapley values of a Python callable; exact unless permutations is given.");

  m.def("explain_model",
        [](const std::string& model_path, const std::vector<std::vector<double>>& x,
           const std::vector<std::vector<double>>& background, std::optional<int> permutations,
           std::uint64_t seed) {
          std::ifstream in(model_path);
          if (!in) throw Error(ErrorCode::MissingArtifact, "missing " + model_path);
          const auto model = shap_model(load_model(in));
          const Matrix xm = to_matrix(x), bg = to_matrix(background);
          ShapReport report;
          {
            py::gil_scoped_release release;
            report = permutations ? shapley_sampled(model, xm, bg, *permutations, seed)
                                  : shapley_exact(model, xm, bg);
          }
          return shap_dict(report);
        },
        py::arg("model_path"), py::arg("x"), py::arg("background"),
        py::arg("permutations") = py::none(), py::arg("seed") = 42);

  const auto pipeline_args = [](auto command) {
    return [command](const std::filesystem::path& run_dir, std::optional<std::uint64_t> seed, int jobs,
                     const std::optional<std::filesystem::path>& config,
                     const std::map<std::string, std::string>& overrides) {
      const RunConfig cfg = make_config(run_dir, seed, jobs, config, overrides);
      py::gil_scoped_release release;
      command(cfg);
    };
  };
  const auto def_command = [&](const char* name, auto command, const char* doc) {
    m.def(name, pipeline_args(command), py::arg("run_dir"), py::arg("seed") = py::none(),
          py::arg("jobs") = 1, py::arg("config") = py::none(),
          py::arg("overrides") = std::map<std::string, std::string>{}, doc);
  };
  def_command("synth", [](const RunConfig& c) { cmd_synth(c); }, "Generate the synthetic cohort.");
  def_command("extract", [](const RunConfig& c) { cmd_extract(c); }, "Compute indicator tables.");
  def_command("dataset", [](const RunConfig& c) { cmd_dataset(c); }, "Write per-task datasets.");
  def_command("train_eval", [](const RunConfig& c) { cmd_train_eval(c); },
              "Leave-one-out evaluation and final fits.");
  def_command("explain", [](const RunConfig& c) { cmd_explain(c); },
              "Shapley explanations of the final GBDT models.");
  def_command("report", [](const RunConfig& c) { cmd_report(c); }, "Write metrics.csv.");
  def_command("run_all",
              [](const RunConfig& c) {
                cmd_synth(c);
                cmd_extract(c);
                cmd_dataset(c);
                cmd_train_eval(c);
                cmd_explain(c);
                cmd_report(c);
              },
              "Every command in order.");
}
