#include "pentrace/recording.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "pentrace/error.hpp"
#include "pentrace/numfmt.hpp"

namespace pentrace {

namespace {

constexpr std::array<std::string_view, 8> kColumns = {"t",  "ax", "ay", "az",
                                                      "gx", "gy", "gz", "f"};

std::vector<double>& channel(PenRecording& rec, std::size_t c) {
  switch (c) {
    case 0: return rec.t;
    case 1: case 2: case 3: return rec.accel[c - 1];
    case 4: case 5: case 6: return rec.gyro[c - 4];
    default: return rec.force;
  }
}

const std::vector<double>& channel(const PenRecording& rec, std::size_t c) {
  return channel(const_cast<PenRecording&>(rec), c);
}

double median_step(const std::vector<double>& t) {
  std::vector<double> dt;
  dt.reserve(t.size());
  for (std::size_t i = 1; i < t.size(); ++i) dt.push_back(t[i] - t[i - 1]);
  auto mid = dt.begin() + static_cast<std::ptrdiff_t>(dt.size() / 2);
  std::nth_element(dt.begin(), mid, dt.end());
  return *mid;
}

void finalize_loaded(PenRecording& rec) {
  for (std::size_t c = 1; c < kColumns.size(); ++c) {
    if (channel(rec, c).size() != rec.t.size()) {
      throw Error(ErrorCode::MalformedInput, "channels have unequal lengths");
    }
  }
  if (rec.t.size() < 2) {
    throw Error(ErrorCode::TooShort, "recording has fewer than 2 samples");
  }
  const double t0 = rec.t.front();
  for (double& v : rec.t) v -= t0;
  validate(rec);
}

PenRecording load_csv(std::istream& in) {
  PenRecording rec;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedInput, "empty recording");
  const auto header = split_fields(line);
  if (header.size() != kColumns.size()) {
    throw Error(ErrorCode::MalformedInput,
                "expected 8 columns in header, got " + std::to_string(header.size()));
  }
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    if (header[c] != kColumns[c]) {
      throw Error(ErrorCode::MalformedInput, "unexpected header column '" +
                                                 std::string(header[c]) + "'");
    }
  }
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_fields(line);
    if (cells.size() != kColumns.size()) {
      throw Error(ErrorCode::MalformedInput, "row " + std::to_string(row) + " has " +
                                                 std::to_string(cells.size()) + " columns");
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto value = parse_double(cells[c]);
      if (!value || !std::isfinite(*value)) {
        throw Error(ErrorCode::MalformedInput,
                    "row " + std::to_string(row) + ": non-numeric cell '" +
                        std::string(cells[c]) + "'");
      }
      channel(rec, c).push_back(*value);
    }
  }
  finalize_loaded(rec);
  rec.sample_rate = 1.0 / median_step(rec.t);
  return rec;
}

PenRecording load_json(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("channels") || !doc["channels"].is_object()) {
    throw Error(ErrorCode::MalformedInput, "JSON recording needs a 'channels' object");
  }
  PenRecording rec;
  const auto& channels = doc["channels"];
  if (channels.size() != kColumns.size()) {
    throw Error(ErrorCode::MalformedInput, "JSON recording needs exactly 8 channels");
  }
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    const std::string key(kColumns[c]);
    if (!channels.contains(key) || !channels[key].is_array()) {
      throw Error(ErrorCode::MalformedInput, "missing channel '" + key + "'");
    }
    auto& dst = channel(rec, c);
    for (const auto& v : channels[key]) {
      if (!v.is_number()) {
        throw Error(ErrorCode::MalformedInput, "non-numeric value in channel '" + key + "'");
      }
      dst.push_back(v.get<double>());
    }
  }
  std::optional<double> declared_rate;
  if (doc.contains("meta")) {
    const auto& meta = doc["meta"];
    try {
      if (meta.contains("subject_id")) rec.subject_id = meta["subject_id"].get<std::string>();
      if (meta.contains("task")) rec.task = parse_task(meta["task"].get<std::string>());
      if (meta.contains("age_group") && meta["age_group"].is_string()) {
        const auto g = meta["age_group"].get<std::string>();
        if (g != "unknown") rec.age_group = parse_group(g);
      }
      if (meta.contains("sample_rate")) declared_rate = meta["sample_rate"].get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedInput, std::string("bad meta field: ") + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedInput, e.what());
    }
  }
  finalize_loaded(rec);
  rec.sample_rate = declared_rate.value_or(1.0 / median_step(rec.t));
  return rec;
}

}  // namespace

std::string_view to_string(WritingTask task) noexcept {
  return task == WritingTask::Text ? "Text" : "List";
}

std::string_view to_string(AgeGroup group) noexcept {
  switch (group) {
    case AgeGroup::YY: return "YY";
    case AgeGroup::EY: return "EY";
    case AgeGroup::EF: return "EF";
    case AgeGroup::EE: return "EE";
  }
  return "??";
}

WritingTask parse_task(std::string_view text) {
  if (text == "Text" || text == "text") return WritingTask::Text;
  if (text == "List" || text == "list") return WritingTask::List;
  throw Error(ErrorCode::InvalidArgument, "unknown writing task '" + std::string(text) + "'");
}

AgeGroup parse_group(std::string_view text) {
  for (AgeGroup g : kAllGroups) {
    if (text == to_string(g)) return g;
  }
  throw Error(ErrorCode::UnknownGroup, "unknown age group '" + std::string(text) + "'");
}

void validate(const PenRecording& rec) {
  const std::size_t n = rec.t.size();
  for (std::size_t c = 1; c < kColumns.size(); ++c) {
    if (channel(rec, c).size() != n) {
      throw Error(ErrorCode::MalformedInput, "channels have unequal lengths");
    }
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(rec.t[i] > rec.t[i - 1])) {
      throw Error(ErrorCode::NonMonotonicTime,
                  "timestamp not increasing at sample " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (rec.force[i] < 0.0) {
      throw Error(ErrorCode::NegativeForce,
                  "negative tip force at sample " + std::to_string(i));
    }
  }
  if (n < kMinSamples) {
    throw Error(ErrorCode::TooShort, "recording has " + std::to_string(n) +
                                         " samples, need at least " +
                                         std::to_string(kMinSamples));
  }
}

PenRecording load_recording(std::istream& source, RecordingFormat format) {
  return format == RecordingFormat::Csv ? load_csv(source) : load_json(source);
}

PenRecording load_recording_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open recording '" + path + "'");
  const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  return load_recording(in, json ? RecordingFormat::Json : RecordingFormat::Csv);
}

void write_recording_csv(std::ostream& out, const PenRecording& rec) {
  out << "t,ax,ay,az,gx,gy,gz,f\n";
  std::string line;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    line.clear();
    for (std::size_t c = 0; c < kColumns.size(); ++c) {
      if (c) line += ',';
      line += format_double(channel(rec, c)[i]);
    }
    line += '\n';
    out << line;
  }
}

void write_recording_json(std::ostream& out, const PenRecording& rec) {
  nlohmann::json doc;
  doc["meta"] = {{"subject_id", rec.subject_id},
                 {"task", std::string(to_string(rec.task))},
                 {"age_group", rec.age_group ? std::string(to_string(*rec.age_group))
                                             : std::string("unknown")},
                 {"sample_rate", rec.sample_rate}};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    doc["channels"][std::string(kColumns[c])] = channel(rec, c);
  }
  out << doc.dump() << '\n';
}

PenRecording resample_uniform(const PenRecording& rec, double target_hz) {
  if (!(target_hz > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "target rate must be positive");
  }
  const double duration = rec.t.back() - rec.t.front();
  const auto n_out = static_cast<std::size_t>(std::floor(duration * target_hz + 1e-9)) + 1;
  if (n_out < kMinSamples) {
    throw Error(ErrorCode::TooShort, "resampled recording has only " +
                                         std::to_string(n_out) + " samples");
  }

  PenRecording out;
  out.sample_rate = target_hz;
  out.subject_id = rec.subject_id;
  out.task = rec.task;
  out.age_group = rec.age_group;
  for (std::size_t c = 0; c < kColumns.size(); ++c) channel(out, c).resize(n_out);

  const double t0 = rec.t.front();
  std::size_t seg = 0;
  for (std::size_t k = 0; k < n_out; ++k) {
    const double tk = static_cast<double>(k) / target_hz;
    while (seg + 2 < rec.size() && rec.t[seg + 1] - t0 <= tk) ++seg;
    const double ta = rec.t[seg] - t0;
    const double tb = rec.t[seg + 1] - t0;
    const double w = std::clamp((tk - ta) / (tb - ta), 0.0, 1.0);
    out.t[k] = tk;
    for (std::size_t c = 1; c < kColumns.size(); ++c) {
      const auto& src = channel(rec, c);
      channel(out, c)[k] = w == 0.0 ? src[seg] : src[seg] + w * (src[seg + 1] - src[seg]);
    }
  }
  return out;
}

std::vector<bool> StrokeSegmentation::non_pause_mask(std::size_t n) const {
  std::vector<bool> mask(n, true);
  for (const Interval& p : pauses) {
    for (std::size_t i = p.begin; i < p.end && i < n; ++i) mask[i] = false;
  }
  return mask;
}

StrokeSegmentation segment_force(std::span<const double> force, double sample_rate,
                                 const SegmentationParams& params) {
  const double enter = params.force_threshold;
  const double exit = params.hysteresis_ratio * params.force_threshold;
  const double min_len = params.min_stroke * sample_rate - 1e-9;

  StrokeSegmentation seg;
  seg.pause_cutoff = params.pause_cutoff;
  seg.sample_rate = sample_rate;

  bool writing = false;
  std::size_t start = 0;
  auto close = [&](std::size_t end) {
    if (static_cast<double>(end - start) >= min_len) seg.strokes.push_back({start, end});
  };
  for (std::size_t i = 0; i < force.size(); ++i) {
    if (!writing && force[i] > enter) {
      writing = true;
      start = i;
    } else if (writing && force[i] < exit) {
      writing = false;
      close(i);
    }
  }
  if (writing) close(force.size());

  if (seg.strokes.empty()) {
    throw Error(ErrorCode::EmptyWriting, "no strokes above the force threshold");
  }

  if (seg.strokes.front().begin > 0) seg.boundary.push_back({0, seg.strokes.front().begin});
  for (std::size_t k = 0; k + 1 < seg.strokes.size(); ++k) {
    const Interval gap{seg.strokes[k].end, seg.strokes[k + 1].begin};
    (seg.seconds(gap) > params.pause_cutoff ? seg.pauses : seg.in_air).push_back(gap);
  }
  if (seg.strokes.back().end < force.size()) {
    seg.boundary.push_back({seg.strokes.back().end, force.size()});
  }
  return seg;
}

StrokeSegmentation segment_strokes(const PenRecording& rec, const SegmentationParams& params) {
  return segment_force(rec.force, rec.sample_rate, params);
}

}  // namespace pentrace
