#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pentrace/config.hpp"
#include "pentrace/error.hpp"
#include "pentrace/pipeline.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> run_dir;
  bool fold_safe_scaling = false;
  bool print_config = false;
};

pentrace::RunConfig resolve(const Flags& f) {
  pentrace::RunConfig cfg;
  if (!f.config_path.empty()) pentrace::apply_config_file(cfg, f.config_path);
  if (f.seed) cfg.set_seed(*f.seed);
  if (f.jobs) {
    if (*f.jobs < 1) throw pentrace::Error(pentrace::ErrorCode::ConfigInvalid, "--jobs must be >= 1");
    cfg.jobs = *f.jobs;
  }
  if (f.run_dir) cfg.run_dir = *f.run_dir;
  if (f.fold_safe_scaling) cfg.fold_safe_scaling = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smart-pen handwriting pipeline: synthetic cohorts, indicators, "
               "age-group classifiers and Shapley explanations."};
  app.require_subcommand(0, 1);

  Flags flags;
  app.add_option("--config", flags.config_path, "Flat key = value configuration file");
  app.add_option("--seed", flags.seed, "Base seed (overrides the config file)");
  app.add_option("--jobs", flags.jobs, "Worker threads");
  app.add_option("--run-dir", flags.run_dir, "Run directory (overrides run_dir)");
  app.add_flag("--fold-safe-scaling", flags.fold_safe_scaling,
               "Refit imputation and scaling inside every LOO fold");
  app.add_flag("--print-config", flags.print_config, "Print the effective configuration");

  auto* synth = app.add_subcommand("synth", "Generate the synthetic cohort");
  auto* extract = app.add_subcommand("extract", "Compute indicators for every recording");
  std::string input_dir;
  extract->add_option("--input", input_dir, "Recordings directory (default: <run>/cohort)");
  auto* dataset = app.add_subcommand("dataset", "Write per-task datasets");
  auto* train = app.add_subcommand("train-eval", "Leave-one-out evaluation and final fits");
  auto* explain = app.add_subcommand("explain", "Shapley explanations of the final GBDT models");
  std::string explain_task, explain_dataset;
  explain->add_option("--task", explain_task, "Task such as EFvsEE (default: all)");
  explain->add_option("--dataset", explain_dataset, "text, list or textlist (default: all)");
  auto* report = app.add_subcommand("report", "Consolidate reports into metrics.csv");
  for (auto* sub : {synth, extract, dataset, train, explain, report}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(flags);
    if (flags.print_config) pentrace::print_config(std::cout, cfg);
    if (synth->parsed()) {
      pentrace::cmd_synth(cfg);
    } else if (extract->parsed()) {
      std::optional<std::filesystem::path> input;
      if (!input_dir.empty()) input = input_dir;
      pentrace::cmd_extract(cfg, input);
    } else if (dataset->parsed()) {
      pentrace::cmd_dataset(cfg);
    } else if (train->parsed()) {
      pentrace::cmd_train_eval(cfg);
    } else if (explain->parsed()) {
      std::optional<std::string> task, ds;
      if (!explain_task.empty()) task = explain_task;
      if (!explain_dataset.empty()) ds = explain_dataset;
      pentrace::cmd_explain(cfg, task, ds);
    } else if (report->parsed()) {
      pentrace::cmd_report(cfg);
    } else if (!flags.print_config) {
      std::cout << app.help();
    }
  } catch (const pentrace::Error& e) {
    std::cerr << pentrace::error_record(std::string(pentrace::to_string(e.code())), e.what())
              << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << pentrace::error_record("Internal", e.what()) << '\n';
    return 3;
  }
  return 0;
}
