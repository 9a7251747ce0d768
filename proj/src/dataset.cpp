#include "pentrace/dataset.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>

#include <json.hpp>

#include "pentrace/error.hpp"
#include "pentrace/numfmt.hpp"

namespace pentrace {

namespace {

std::vector<std::string> indicator_names(std::string_view suffix = {}) {
  std::vector<std::string> out;
  for (auto name : kIndicatorNames) out.push_back(std::string(name) + std::string(suffix));
  return out;
}

std::vector<std::optional<double>> as_row(const FeatureVector& fv) {
  return {fv.values.begin(), fv.values.end()};
}

}  // namespace

FeatureTables build_tables(std::span<const SubjectFeatures> features) {
  struct Entry {
    AgeGroup group;
    std::optional<FeatureVector> text;
    std::optional<FeatureVector> list;
  };
  std::map<std::string, Entry> by_subject;
  for (const auto& sf : features) {
    auto [it, inserted] = by_subject.try_emplace(sf.subject_id, Entry{sf.group, {}, {}});
    if (!inserted && it->second.group != sf.group) {
      throw Error(ErrorCode::DuplicateSubject,
                  "subject '" + sf.subject_id + "' appears with two age groups");
    }
    auto& slot = sf.task == WritingTask::Text ? it->second.text : it->second.list;
    if (slot) {
      throw Error(ErrorCode::DuplicateSubject, "subject '" + sf.subject_id + "' has two " +
                                                   std::string(to_string(sf.task)) +
                                                   " recordings");
    }
    slot = sf.features;
  }

  FeatureTables out;
  out.text = {"text", indicator_names(), {}};
  out.list = {"list", indicator_names(), {}};
  out.text_list.name = "textlist";
  out.text_list.feature_names = indicator_names("_text");
  for (auto& n : indicator_names("_list")) out.text_list.feature_names.push_back(std::move(n));

  for (const auto& [id, entry] : by_subject) {
    if (entry.text) out.text.rows.push_back({id, entry.group, as_row(*entry.text)});
    if (entry.list) out.list.rows.push_back({id, entry.group, as_row(*entry.list)});
    if (entry.text && entry.list) {
      auto merged = as_row(*entry.text);
      for (const auto& v : entry.list->values) merged.push_back(v);
      out.text_list.rows.push_back({id, entry.group, std::move(merged)});
    } else {
      out.warnings.push_back(std::string(to_string(ErrorCode::MissingTask)) + ": subject '" + id +
                             "' lacks the " + (entry.text ? "List" : "Text") +
                             " task and is excluded from the textlist table");
    }
  }
  return out;
}

void write_table_csv(std::ostream& out, const FeatureTable& table) {
  out << "subject_id,age_group";
  for (const auto& n : table.feature_names) out << ',' << n;
  out << '\n';
  for (const auto& row : table.rows) {
    out << row.subject_id << ',' << to_string(row.group);
    for (const auto& v : row.values) out << ',' << (v ? format_double(*v) : std::string("NA"));
    out << '\n';
  }
}

FeatureTable read_table_csv(std::istream& in, const std::string& name) {
  FeatureTable table;
  table.name = name;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedInput, "empty feature table");
  const auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "subject_id" || header[1] != "age_group") {
    throw Error(ErrorCode::MalformedInput, "feature table header must start with "
                                           "subject_id,age_group");
  }
  for (std::size_t c = 2; c < header.size(); ++c) table.feature_names.emplace_back(header[c]);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_fields(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::MalformedInput,
                  "feature table line " + std::to_string(lineno) + " has wrong column count");
    }
    FeatureRow row;
    row.subject_id = std::string(cells[0]);
    row.group = parse_group(cells[1]);
    for (std::size_t c = 2; c < cells.size(); ++c) {
      if (cells[c] == "NA") {
        row.values.emplace_back();
        continue;
      }
      const auto v = parse_double(cells[c]);
      if (!v) {
        throw Error(ErrorCode::MalformedInput,
                    "feature table line " + std::to_string(lineno) + ": bad value");
      }
      row.values.emplace_back(*v);
    }
    table.rows.push_back(std::move(row));
  }
  std::sort(table.rows.begin(), table.rows.end(),
            [](const FeatureRow& a, const FeatureRow& b) { return a.subject_id < b.subject_id; });
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    if (table.rows[i].subject_id == table.rows[i - 1].subject_id) {
      throw Error(ErrorCode::DuplicateSubject,
                  "subject '" + table.rows[i].subject_id + "' repeated in feature table");
    }
  }
  return table;
}

std::string TaskSpec::name() const {
  return std::string(to_string(younger)) + "vs" + std::string(to_string(older));
}

std::vector<TaskSpec> default_tasks() {
  using G = AgeGroup;
  return {{G::YY, G::EY}, {G::EY, G::EF}, {G::EF, G::EE}, {G::YY, G::EE}, {G::EY, G::EE}};
}

TaskSpec parse_task_spec(std::string_view name) {
  const auto pos = name.find("vs");
  if (pos == std::string_view::npos) {
    throw Error(ErrorCode::UnknownGroup, "task name '" + std::string(name) +
                                             "' is not of the form <group>vs<group>");
  }
  AgeGroup a = parse_group(name.substr(0, pos));
  AgeGroup b = parse_group(name.substr(pos + 2));
  if (a == b) throw Error(ErrorCode::UnknownGroup, "task compares a group with itself");
  if (a > b) std::swap(a, b);
  return {a, b};
}

Scaling Scaling::fit(const std::vector<std::vector<std::optional<double>>>& raw,
                     std::span<const std::size_t> rows) {
  Scaling s;
  const std::size_t d = raw.empty() ? 0 : raw.front().size();
  s.medians.resize(d, 0.0);
  s.min_max.resize(d, {0.0, 0.0});
  std::vector<double> present;
  for (std::size_t c = 0; c < d; ++c) {
    present.clear();
    for (std::size_t r : rows) {
      if (raw[r][c]) present.push_back(*raw[r][c]);
    }
    if (!present.empty()) {
      std::sort(present.begin(), present.end());
      const std::size_t k = present.size();
      s.medians[c] = k % 2 ? present[k / 2] : 0.5 * (present[k / 2 - 1] + present[k / 2]);
    }
    double lo = s.medians[c];
    double hi = s.medians[c];
    if (!present.empty()) {
      lo = std::min(lo, present.front());
      hi = std::max(hi, present.back());
    }
    s.min_max[c] = {lo, hi};
  }
  return s;
}

Matrix Scaling::transform(const std::vector<std::vector<std::optional<double>>>& raw,
                          std::span<const std::size_t> rows) const {
  Matrix x(rows.size(), medians.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < medians.size(); ++c) {
      const double v = raw[rows[i]][c].value_or(medians[c]);
      const auto [lo, hi] = min_max[c];
      x(i, c) = hi > lo ? (v - lo) / (hi - lo) : 0.0;
    }
  }
  return x;
}

Matrix Scaling::inverse(const Matrix& x) const {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const auto [lo, hi] = min_max[c];
      out(i, c) = hi > lo ? lo + x(i, c) * (hi - lo) : lo;
    }
  }
  return out;
}

TaskDataset make_task(const FeatureTable& table, const TaskSpec& spec) {
  if (spec.younger == spec.older) {
    throw Error(ErrorCode::UnknownGroup, "task compares a group with itself");
  }
  const AgeGroup younger = std::min(spec.younger, spec.older);
  const AgeGroup older = std::max(spec.younger, spec.older);

  TaskDataset ds;
  ds.spec = {younger, older};
  ds.task_name = ds.spec.name();
  ds.feature_names = table.feature_names;

  std::vector<const FeatureRow*> picked;
  for (const auto& row : table.rows) {
    if (row.group == younger || row.group == older) picked.push_back(&row);
  }
  std::sort(picked.begin(), picked.end(),
            [](const FeatureRow* a, const FeatureRow* b) { return a->subject_id < b->subject_id; });
  std::size_t n_old = 0;
  for (const auto* row : picked) {
    if (row->values.size() != table.feature_names.size()) {
      throw Error(ErrorCode::DimensionMismatch, "row width differs from feature names");
    }
    ds.subject_ids.push_back(row->subject_id);
    ds.groups.push_back(row->group);
    ds.raw.push_back(row->values);
    const int label = row->group == older ? 1 : 0;
    n_old += static_cast<std::size_t>(label);
    ds.y.push_back(label);
  }
  const std::size_t n_young = ds.y.size() - n_old;
  if ((n_old == 0) != (n_young == 0)) {
    throw Error(ErrorCode::SingleClassInput,
                "task " + ds.task_name + " has rows from only one group");
  }
  if (n_old < 2 || n_young < 2) {
    throw Error(ErrorCode::InsufficientRows,
                "task " + ds.task_name + " needs at least 2 rows per group (got " +
                    std::to_string(n_young) + " and " + std::to_string(n_old) + ")");
  }
  std::vector<std::size_t> all(ds.y.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  ds.scaling = Scaling::fit(ds.raw, all);
  ds.x = ds.scaling.transform(ds.raw, all);
  return ds;
}

void write_task_csv(std::ostream& out, const TaskDataset& ds) {
  out << "subject_id,label";
  for (const auto& n : ds.feature_names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.subject_ids[i] << ',' << ds.y[i];
    for (std::size_t c = 0; c < ds.dims(); ++c) out << ',' << format_double(ds.x(i, c));
    out << '\n';
  }
}

void write_task_sidecar(std::ostream& out, const TaskDataset& ds, const std::string& dataset) {
  nlohmann::ordered_json doc;
  doc["task"] = ds.task_name;
  doc["dataset"] = dataset;
  doc["younger"] = std::string(to_string(ds.spec.younger));
  doc["older"] = std::string(to_string(ds.spec.older));
  doc["positive_class"] = std::string(to_string(ds.spec.older));
  doc["n_rows"] = ds.size();
  doc["n_positive"] = std::count(ds.y.begin(), ds.y.end(), 1);
  auto& params = doc["norm_params"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < ds.dims(); ++c) {
    params.push_back({{"feature", ds.feature_names[c]},
                      {"min", ds.scaling.min_max[c].first},
                      {"max", ds.scaling.min_max[c].second},
                      {"median", ds.scaling.medians[c]}});
  }
  out << doc.dump(2) << '\n';
}

}  // namespace pentrace
