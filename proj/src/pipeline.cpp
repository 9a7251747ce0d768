#include "pentrace/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pentrace/error.hpp"
#include "pentrace/explain.hpp"
#include "pentrace/parallel.hpp"
#include "pentrace/rng.hpp"

namespace fs = std::filesystem;

namespace pentrace {

void write_file_atomic(const fs::path& path, const std::function<void(std::ostream&)>& writer) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    writer(out);
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename into " + path.string());
}

fs::path RunLayout::feature_table(const std::string& dataset) const {
  return features() / (dataset + ".csv");
}

fs::path RunLayout::report(ModelKind kind, const std::string& dataset,
                           const std::string& task) const {
  return reports() / (std::string(to_string(kind)) + "_" + dataset + "_" + task + ".json");
}

fs::path RunLayout::model(ModelKind kind, const std::string& dataset,
                          const std::string& task) const {
  return models() / (std::string(to_string(kind)) + "_" + dataset + "_" + task + ".json");
}

namespace {

constexpr ModelKind kModelOrder[] = {ModelKind::LogReg, ModelKind::Gbdt};

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingArtifact, "missing " + path.string());
  return in;
}

// Prefix module errors with the file they came from.
template <typename F>
auto with_context(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), what + ": " + e.what());
  }
}

// run.json keeps the effective configuration and one entry per command.
void record_step(const RunConfig& cfg, const std::string& command,
                 nlohmann::ordered_json outputs) {
  const RunLayout layout{cfg.run_dir};
  nlohmann::ordered_json doc;
  if (fs::exists(layout.run_json())) {
    std::ifstream in(layout.run_json());
    doc = nlohmann::ordered_json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) doc = nlohmann::ordered_json::object();
  }
  doc["tool"] = "pentrace";
  doc["version"] = kToolVersion;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::ostringstream dump;
  print_config(dump, cfg);
  std::istringstream lines(dump.str());
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find(" = ");
    config[line.substr(0, eq)] = line.substr(eq + 3);
  }
  doc["config"] = std::move(config);
  doc["steps"][command] = std::move(outputs);
  write_file_atomic(layout.run_json(), [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

struct LoadedRecording {
  std::string file;
  PenRecording recording;
};

std::vector<SubjectFeatures> extract_all(const std::vector<LoadedRecording>& recs,
                                         const RunConfig& cfg) {
  std::vector<SubjectFeatures> out(recs.size());
  parallel_for(recs.size(), cfg.jobs, [&](std::size_t i) {
    const auto& r = recs[i];
    out[i].subject_id = r.recording.subject_id;
    out[i].group = *r.recording.age_group;
    out[i].task = r.recording.task;
    out[i].features =
        with_context(r.file, [&] { return extract_features(r.recording, cfg.extraction); });
  });
  return out;
}

TaskDataset task_for(const RunLayout& layout, const std::string& dataset, const TaskSpec& spec) {
  const auto table = load_feature_table(layout, dataset);
  return with_context(dataset + "/" + spec.name(), [&] { return make_task(table, spec); });
}

}  // namespace

FeatureTable load_feature_table(const RunLayout& layout, const std::string& dataset) {
  auto in = open_input(layout.feature_table(dataset));
  return with_context(layout.feature_table(dataset).string(),
                      [&] { return read_table_csv(in, dataset); });
}

void cmd_synth(const RunConfig& cfg) {
  const RunLayout layout{cfg.run_dir};
  const auto plan = cohort_plan(cfg.cohort);
  fs::create_directories(layout.cohort());
  std::vector<ManifestEntry> entries(plan.size());
  parallel_for(plan.size(), cfg.jobs, [&](std::size_t i) {
    const auto rec = generate_for(plan[i], cfg.cohort);
    validate(rec);
    std::ostringstream buf;
    write_recording_csv(buf, rec);
    const std::string bytes = buf.str();
    const std::string file = recording_file_name(plan[i]);
    write_file_atomic(layout.cohort() / file, [&](std::ostream& out) { out << bytes; });
    entries[i] = {plan[i], file, sha256_hex(bytes)};
  });
  write_file_atomic(layout.cohort() / "manifest.csv",
                    [&](std::ostream& out) { write_manifest(out, entries); });
  record_step(cfg, "synth",
              {{"cohort", layout.cohort().string()}, {"recordings", entries.size()}});
}

void cmd_extract(const RunConfig& cfg, const std::optional<fs::path>& input) {
  const RunLayout layout{cfg.run_dir};
  const fs::path dir = input.value_or(layout.cohort());
  if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingArtifact, "no directory " + dir.string());

  std::vector<LoadedRecording> recs;
  const fs::path manifest = dir / "manifest.csv";
  if (fs::exists(manifest)) {
    auto in = open_input(manifest);
    const auto entries = with_context(manifest.string(), [&] { return read_manifest(in); });
    recs.resize(entries.size());
    parallel_for(entries.size(), cfg.jobs, [&](std::size_t i) {
      const auto& e = entries[i];
      const fs::path path = dir / e.file;
      if (!fs::exists(path)) throw Error(ErrorCode::MissingArtifact, "missing " + path.string());
      auto rec = with_context(e.file, [&] { return load_recording_file(path.string()); });
      rec.subject_id = e.spec.subject_id;
      rec.task = e.spec.task;
      rec.age_group = e.spec.group;
      recs[i] = {e.file, std::move(rec)};
    });
  } else {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      throw Error(ErrorCode::MissingArtifact,
                  "no manifest.csv or JSON recordings in " + dir.string());
    }
    recs.resize(files.size());
    parallel_for(files.size(), cfg.jobs, [&](std::size_t i) {
      const std::string name = files[i].filename().string();
      auto rec = with_context(name, [&] { return load_recording_file(files[i].string()); });
      if (!rec.age_group || rec.subject_id.empty()) {
        throw Error(ErrorCode::MalformedInput, name + ": meta lacks subject_id or age_group");
      }
      recs[i] = {name, std::move(rec)};
    });
  }

  const auto features = extract_all(recs, cfg);
  const auto tables = build_tables(features);
  for (const FeatureTable* t : {&tables.text, &tables.list, &tables.text_list}) {
    write_file_atomic(layout.feature_table(t->name),
                      [&](std::ostream& out) { write_table_csv(out, *t); });
  }
  write_file_atomic(layout.features() / "warnings.txt", [&](std::ostream& out) {
    for (const auto& w : tables.warnings) out << w << '\n';
  });
  record_step(cfg, "extract",
              {{"input", dir.string()},
               {"recordings", recs.size()},
               {"warnings", tables.warnings}});
}

void cmd_dataset(const RunConfig& cfg) {
  const RunLayout layout{cfg.run_dir};
  std::vector<std::string> written;
  for (const auto& ds : cfg.datasets) {
    const auto table = load_feature_table(layout, ds);
    for (const auto& spec : cfg.tasks) {
      const auto task = with_context(ds + "/" + spec.name(), [&] { return make_task(table, spec); });
      const std::string stem = ds + "_" + task.task_name;
      write_file_atomic(layout.datasets() / (stem + ".csv"),
                        [&](std::ostream& out) { write_task_csv(out, task); });
      write_file_atomic(layout.datasets() / (stem + ".json"),
                        [&](std::ostream& out) { write_task_sidecar(out, task, ds); });
      written.push_back(stem);
    }
  }
  record_step(cfg, "dataset", {{"datasets", written}});
}

void cmd_train_eval(const RunConfig& cfg) {
  const RunLayout layout{cfg.run_dir};
  const LooOptions options{cfg.fold_safe_scaling, cfg.jobs};
  std::vector<std::string> written;
  for (const auto& ds : cfg.datasets) {
    for (const auto& spec : cfg.tasks) {
      const auto task = task_for(layout, ds, spec);
      for (ModelKind kind : kModelOrder) {
        const std::string what =
            std::string(to_string(kind)) + " " + ds + "/" + task.task_name;
        auto report = with_context(what, [&] { return loo_cv(task, kind, cfg.train, options); });
        report.dataset = ds;
        write_file_atomic(layout.report(kind, ds, task.task_name),
                          [&](std::ostream& out) { write_report_json(out, report); });
        const Model model = with_context(
            what, [&] { return final_fit(task, kind, cfg.train, report.mean_best_iteration); });
        write_file_atomic(layout.model(kind, ds, task.task_name),
                          [&](std::ostream& out) { save_model(out, model); });
        written.push_back(layout.report(kind, ds, task.task_name).filename().string());
      }
    }
  }
  record_step(cfg, "train-eval", {{"reports", written}});
}

void cmd_explain(const RunConfig& cfg, const std::optional<std::string>& task,
                 const std::optional<std::string>& dataset) {
  const RunLayout layout{cfg.run_dir};
  std::vector<std::string> datasets = cfg.datasets;
  if (dataset) datasets = {*dataset};
  std::vector<TaskSpec> specs = cfg.tasks;
  if (task) specs = {parse_task_spec(*task)};

  std::vector<std::string> written;
  for (const auto& ds : datasets) {
    for (const auto& spec : specs) {
      const auto data = task_for(layout, ds, spec);
      const fs::path model_path = layout.model(ModelKind::Gbdt, ds, data.task_name);
      auto in = open_input(model_path);
      const Model model = with_context(model_path.string(), [&] { return load_model(in); });
      if (feature_count(model) != data.dims()) {
        throw Error(ErrorCode::DimensionMismatch,
                    model_path.string() + " does not match dataset " + ds);
      }
      const ShapModel shap = shap_model(model);
      const ShapReport report =
          data.dims() <= kMaxExactFeatures
              ? shapley_exact(shap, data.x, data.x, cfg.jobs)
              : shapley_sampled(shap, data.x, data.x, cfg.shap_permutations, cfg.seed, cfg.jobs);
      const std::string stem = ds + "_" + data.task_name;
      write_file_atomic(layout.explain() / (stem + "_shap.json"), [&](std::ostream& out) {
        write_shap_json(out, report, data.feature_names, data.subject_ids);
      });
      write_file_atomic(layout.explain() / (stem + "_beeswarm.csv"), [&](std::ostream& out) {
        write_beeswarm_csv(out, report, data.x, data.feature_names, data.subject_ids);
      });
      written.push_back(stem);
    }
  }
  record_step(cfg, "explain", {{"explanations", written}});
}

void cmd_report(const RunConfig& cfg) {
  const RunLayout layout{cfg.run_dir};
  std::vector<EvalReport> reports;
  for (const auto& ds : cfg.datasets) {
    for (const auto& spec : cfg.tasks) {
      for (ModelKind kind : kModelOrder) {
        const auto path = layout.report(kind, ds, spec.name());
        auto in = open_input(path);
        reports.push_back(with_context(path.string(), [&] { return read_report_json(in); }));
      }
    }
  }
  write_file_atomic(layout.metrics(), [&](std::ostream& out) {
    write_metrics_header(out);
    for (const auto& r : reports) write_metrics_row(out, r);
  });
  record_step(cfg, "report", {{"metrics", layout.metrics().string()}, {"rows", reports.size()}});
}

std::string error_record(const std::string& code, const std::string& message) {
  return nlohmann::ordered_json{{"error", code}, {"message", message}}.dump();
}

}  // namespace pentrace
