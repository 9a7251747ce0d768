#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "pentrace/config.hpp"
#include "pentrace/error.hpp"
#include "pentrace/pipeline.hpp"

using namespace pentrace;
namespace fs = std::filesystem;

namespace {

ErrorCode config_error(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  try {
    apply_config(cfg, in);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error for: " << text);
  return ErrorCode::IoError;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Small cohort that still exercises every dataset, task and model.
RunConfig small_run(const fs::path& dir) {
  RunConfig cfg;
  cfg.run_dir = dir;
  cfg.set_seed(5);
  cfg.cohort.subjects_per_group = 4;
  cfg.cohort.text_duration = 20.0;
  cfg.cohort.list_duration = 15.0;
  cfg.train.max_rounds = 60;
  return cfg;
}

void run_all(const RunConfig& cfg) {
  cmd_synth(cfg);
  cmd_extract(cfg);
  cmd_dataset(cfg);
  cmd_train_eval(cfg);
  cmd_explain(cfg, std::string("EFvsEE"), std::string("text"));
  cmd_report(cfg);
}

struct CliResult {
  int status = -1;
  std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& scratch) {
  const char* exe = std::getenv("PENTRACE_CLI");
  REQUIRE(exe != nullptr);
  const auto err_file = scratch / "stderr.txt";
  const std::string cmd =
      std::string(exe) + " " + args + " >/dev/null 2>" + err_file.string();
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(err_file)};
}

}  // namespace

TEST_CASE("configuration files set values and reject bad input") {
  RunConfig cfg;
  std::istringstream in(
      "# comment\n"
      "seed = 9\n"
      "jobs = 3\n"
      "gbdt_depth = 3\n"
      "tasks = YYvsEE, EFvsEE\n"
      "datasets = text\n"
      "synth.EE.gap_mean = 0.9\n");
  apply_config(cfg, in);
  CHECK(cfg.seed == 9);
  CHECK(cfg.jobs == 3);
  CHECK(cfg.train.depth == 3);
  CHECK(cfg.tasks.size() == 2);
  CHECK(cfg.datasets == std::vector<std::string>{"text"});
  CHECK(cfg.cohort.groups[3].gap_mean == 0.9);

  CHECK(config_error("no_such_key = 1\n") == ErrorCode::ConfigInvalid);
  CHECK(config_error("jobs = 0\n") == ErrorCode::ConfigInvalid);
  CHECK(config_error("jobs = two\n") == ErrorCode::ConfigInvalid);
  CHECK(config_error("gbdt_learning_rate = -1\n") == ErrorCode::ConfigInvalid);
  CHECK(config_error("datasets = prose\n") == ErrorCode::ConfigInvalid);
  CHECK(config_error("shap_permutations = 10\n") == ErrorCode::ConfigInvalid);
  CHECK(config_error("just some words\n") == ErrorCode::ConfigInvalid);
}

TEST_CASE("printed configuration parses back unchanged") {
  RunConfig cfg;
  cfg.set_seed(123);
  cfg.train.learning_rate = 0.05;
  cfg.cohort.gap_scale = 0.5;
  std::ostringstream first;
  print_config(first, cfg);
  RunConfig back;
  std::istringstream in(first.str());
  apply_config(back, in);
  std::ostringstream second;
  print_config(second, back);
  CHECK(first.str() == second.str());
  CHECK(config_keys().size() > 40);
}

TEST_CASE("the pipeline runs end to end and is reproducible") {
  const auto a = fixture::scratch("cli_run_a");
  const auto b = fixture::scratch("cli_run_b");
  auto cfg_a = small_run(a);
  auto cfg_b = small_run(b);
  cfg_b.jobs = 3;
  run_all(cfg_a);
  run_all(cfg_b);

  const RunLayout la{a}, lb{b};
  const auto metrics = slurp(la.metrics());
  std::size_t lines = 0;
  for (char c : metrics) lines += c == '\n';
  CHECK(lines == 31);
  CHECK(metrics == slurp(lb.metrics()));
  CHECK(fs::exists(la.cohort() / "manifest.csv"));
  CHECK(fs::exists(la.feature_table("textlist")));
  CHECK(slurp(la.explain() / "text_EFvsEE_shap.json") ==
        slurp(lb.explain() / "text_EFvsEE_shap.json"));
  CHECK(slurp(la.explain() / "text_EFvsEE_beeswarm.csv") ==
        slurp(lb.explain() / "text_EFvsEE_beeswarm.csv"));
  CHECK(slurp(la.run_json()).find("\"report\"") != std::string::npos);
}

TEST_CASE("commands report missing inputs") {
  const auto dir = fixture::scratch("cli_missing");
  RunConfig cfg;
  cfg.run_dir = dir;
  try {
    cmd_train_eval(cfg);
    FAIL("expected MissingArtifact");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingArtifact);
  }
}

TEST_CASE("the command line writes an error record and exits with 2") {
  const auto dir = fixture::scratch("cli_binary");
  std::ofstream(dir / "bad.cfg") << "mystery = 1\n";
  const auto bad = run_cli("--config " + (dir / "bad.cfg").string() + " synth", dir);
  CHECK(bad.status == 2);
  CHECK(bad.err.find("\"error\"") != std::string::npos);
  CHECK(bad.err.find("ConfigInvalid") != std::string::npos);

  const auto missing = run_cli("--run-dir " + (dir / "empty").string() + " train-eval", dir);
  CHECK(missing.status == 2);
  CHECK(missing.err.find("MissingArtifact") != std::string::npos);

  std::ofstream(dir / "one.cfg") << "synth.subjects_per_group = 3\n"
                                    "synth.text_duration = 20\n"
                                    "synth.list_duration = 25\n"
                                    "tasks = YYvsEY\n";
  const std::string base =
      "--config " + (dir / "one.cfg").string() + " --run-dir " + (dir / "run").string();
  CHECK(run_cli(base + " synth", dir).status == 0);
  CHECK(run_cli(base + " extract", dir).status == 0);
  // Drop every EY row so the task has a single class.
  for (const auto& name : {"text", "list", "textlist"}) {
    const auto path = RunLayout{dir / "run"}.feature_table(name);
    std::istringstream in(slurp(path));
    std::ostringstream kept;
    for (std::string line; std::getline(in, line);) {
      if (line.find(",EY,") == std::string::npos && line.rfind("EY", 0) != 0) kept << line << '\n';
    }
    std::ofstream(path, std::ios::trunc) << kept.str();
  }
  const auto single = run_cli(base + " train-eval", dir);
  CHECK(single.status == 2);
  CHECK(single.err.find("SingleClassInput") != std::string::npos);

  CHECK(run_cli("--print-config", dir).status == 0);
}
