#include "pentrace/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>

#include "pentrace/error.hpp"
#include "pentrace/numfmt.hpp"

namespace pentrace {

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
  cohort.seed = s;
}

namespace {

struct Key {
  std::string name;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorCode::ConfigInvalid, "invalid value for " + key + ": '" + value + "'");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& value, Int lo) {
  Int out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || out < lo) bad_value(key, value);
  return out;
}

double parse_positive(const std::string& key, const std::string& value, bool allow_zero = false) {
  const auto parsed = parse_double(value);
  if (!parsed) bad_value(key, value);
  const double v = *parsed;
  if (!std::isfinite(v) || v < 0.0 || (!allow_zero && v == 0.0)) bad_value(key, value);
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  for (const auto f : split_fields(value, ',')) {
    auto t = trim(f);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::vector<Key> registry(RunConfig& c) {
  std::vector<Key> keys;
  auto real = [&](std::string name, double* field, bool allow_zero = false) {
    keys.push_back({name, [field] { return format_double(*field); },
                    [field, name, allow_zero](const std::string& v) {
                      *field = parse_positive(name, v, allow_zero);
                    }});
  };
  auto fraction = [&](std::string name, double* field) {
    keys.push_back({name, [field] { return format_double(*field); },
                    [field, name](const std::string& v) {
                      const double x = parse_positive(name, v);
                      if (x >= 1.0) bad_value(name, v);
                      *field = x;
                    }});
  };
  auto integer = [&](std::string name, int* field, int lo) {
    keys.push_back({name, [field] { return std::to_string(*field); },
                    [field, name, lo](const std::string& v) { *field = parse_int(name, v, lo); }});
  };
  auto size = [&](std::string name, std::size_t* field, std::size_t lo) {
    keys.push_back({name, [field] { return std::to_string(*field); },
                    [field, name, lo](const std::string& v) { *field = parse_int(name, v, lo); }});
  };

  keys.push_back({"run_dir", [&c] { return c.run_dir.string(); },
                  [&c](const std::string& v) {
                    if (v.empty()) bad_value("run_dir", v);
                    c.run_dir = v;
                  }});
  keys.push_back({"seed", [&c] { return std::to_string(c.seed); },
                  [&c](const std::string& v) {
                    c.set_seed(parse_int<std::uint64_t>("seed", v, 0));
                  }});
  integer("jobs", &c.jobs, 1);

  auto& x = c.extraction;
  real("sample_rate", &x.sample_rate);
  real("force_threshold", &x.segmentation.force_threshold);
  fraction("hysteresis_ratio", &x.segmentation.hysteresis_ratio);
  real("min_stroke", &x.segmentation.min_stroke, true);
  real("pause_cutoff", &x.segmentation.pause_cutoff);
  fraction("tilt_alpha", &x.gesture.tilt_alpha);
  real("force_prominence", &x.gesture.force_prominence);
  real("accel_prominence", &x.gesture.accel_prominence);
  size("tremor_window", &x.tremor.window_len, 16);
  integer("emd_max_imfs", &x.tremor.emd.max_imfs, 1);
  real("emd_sift_tol", &x.tremor.emd.sift_tol);
  integer("emd_max_sift_iter", &x.tremor.emd.max_sift_iter, 1);
  real("hht_bin_width", &x.tremor.bin_width);
  integer("apen_m", &x.tremor.apen_m, 1);
  real("apen_r_factor", &x.tremor.apen_r_factor);
  integer("rqa_dim", &x.tremor.rqa.dim, 1);
  integer("rqa_delay", &x.tremor.rqa.delay, 1);
  real("rqa_eps_factor", &x.tremor.rqa.eps_factor);
  integer("rqa_l_min", &x.tremor.rqa.l_min, 1);

  auto& t = c.train;
  integer("gbdt_max_rounds", &t.max_rounds, 1);
  integer("gbdt_early_stopping_rounds", &t.early_stopping_rounds, 1);
  integer("gbdt_depth", &t.depth, 1);
  real("gbdt_learning_rate", &t.learning_rate);
  real("gbdt_l2_leaf", &t.l2_leaf, true);
  fraction("gbdt_inner_val_fraction", &t.inner_val_fraction);
  real("logreg_l2", &t.logreg_l2, true);
  integer("logreg_max_iter", &t.logreg_max_iter, 1);
  real("logreg_tol", &t.logreg_tol);
  keys.push_back({"fold_safe_scaling", [&c] { return std::string(c.fold_safe_scaling ? "true" : "false"); },
                  [&c](const std::string& v) { c.fold_safe_scaling = parse_bool("fold_safe_scaling", v); }});
  keys.push_back({"tasks",
                  [&c] {
                    std::vector<std::string> names;
                    for (const auto& s : c.tasks) names.push_back(s.name());
                    return join(names);
                  },
                  [&c](const std::string& v) {
                    std::vector<TaskSpec> specs;
                    try {
                      for (const auto& name : split_list(v)) specs.push_back(parse_task_spec(name));
                    } catch (const Error&) {
                      bad_value("tasks", v);
                    }
                    if (specs.empty()) bad_value("tasks", v);
                    c.tasks = specs;
                  }});
  keys.push_back({"datasets", [&c] { return join(c.datasets); },
                  [&c](const std::string& v) {
                    auto names = split_list(v);
                    if (names.empty()) bad_value("datasets", v);
                    for (const auto& n : names) {
                      if (n != "text" && n != "list" && n != "textlist") bad_value("datasets", v);
                    }
                    c.datasets = names;
                  }});
  keys.push_back({"shap_permutations", [&c] { return std::to_string(c.shap_permutations); },
                  [&c](const std::string& v) {
                    c.shap_permutations = parse_int("shap_permutations", v, 100);
                  }});

  auto& co = c.cohort;
  size("synth.subjects_per_group", &co.subjects_per_group, 2);
  real("synth.text_duration", &co.text_duration);
  real("synth.list_duration", &co.list_duration);
  real("synth.sample_rate", &co.sample_rate);
  real("synth.gap_scale", &co.gap_scale, true);
  for (AgeGroup g : kAllGroups) {
    auto& p = co.groups[static_cast<std::size_t>(g)];
    const std::string prefix = "synth." + std::string(to_string(g)) + ".";
    real(prefix + "stroke_mean", &p.stroke_mean);
    real(prefix + "stroke_sd", &p.stroke_sd, true);
    real(prefix + "gap_mean", &p.gap_mean);
    real(prefix + "gap_sd", &p.gap_sd);
    real(prefix + "pause_rate", &p.pause_rate, true);
    real(prefix + "pause_mean", &p.pause_mean);
    real(prefix + "force_level", &p.force_level);
    real(prefix + "force_sd", &p.force_sd, true);
    real(prefix + "force_wiggle", &p.force_wiggle, true);
    real(prefix + "tilt_mean", &p.tilt_mean);
    real(prefix + "tilt_jitter", &p.tilt_jitter, true);
    real(prefix + "move_freq", &p.move_freq);
    real(prefix + "move_amp", &p.move_amp, true);
    real(prefix + "tremor_freq", &p.tremor_freq);
    real(prefix + "tremor_amp", &p.tremor_amp, true);
    real(prefix + "tremor_regularity", &p.tremor_regularity, true);
    real(prefix + "noise_floor", &p.noise_floor, true);
    real(prefix + "subject_spread", &p.subject_spread, true);
    integer(prefix + "tail_dof", &p.tail_dof, 3);
    real(prefix + "tilt_spread", &p.tilt_spread, true);
    real(prefix + "gap_spread", &p.gap_spread, true);
    real(prefix + "atypical_rate", &p.atypical_rate, true);
    real(prefix + "atypical_gap_factor", &p.atypical_gap_factor);
    real(prefix + "force_spread", &p.force_spread, true);
  }
  return keys;
}

}  // namespace

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (auto& k : registry(cfg)) {
    if (k.name == key) {
      k.set(value);
      return;
    }
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown config key: " + key);
}

void apply_config(RunConfig& cfg, std::istream& in) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigInvalid,
                  "line " + std::to_string(lineno) + ": expected key = value");
    }
    set_config_value(cfg, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open config " + path.string());
  apply_config(cfg, in);
}

void print_config(std::ostream& out, const RunConfig& cfg) {
  RunConfig copy = cfg;
  for (const auto& k : registry(copy)) out << k.name << " = " << k.get() << '\n';
}

std::vector<std::string> config_keys() {
  RunConfig cfg;
  std::vector<std::string> out;
  for (const auto& k : registry(cfg)) out.push_back(k.name);
  return out;
}

}  // namespace pentrace
