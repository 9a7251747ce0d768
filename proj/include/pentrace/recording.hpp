#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pentrace {

enum class WritingTask { Text, List };

// Age groups in increasing age order: YY 20-39, EY 40-59, EF 60-69, EE 70+.
enum class AgeGroup { YY = 0, EY = 1, EF = 2, EE = 3 };

inline constexpr std::array<AgeGroup, 4> kAllGroups = {AgeGroup::YY, AgeGroup::EY,
                                                       AgeGroup::EF, AgeGroup::EE};

std::string_view to_string(WritingTask task) noexcept;
std::string_view to_string(AgeGroup group) noexcept;
WritingTask parse_task(std::string_view text);
AgeGroup parse_group(std::string_view text);

inline constexpr std::size_t kMinSamples = 250;
inline constexpr double kNominalRateHz = 50.0;

// Uniformly (or near-uniformly) sampled pen signals. Channels are kept in
// separate vectors so that per-channel algorithms can take spans directly.
struct PenRecording {
  std::vector<double> t;  // s, rebased to 0
  std::array<std::vector<double>, 3> accel;  // m/s^2
  std::array<std::vector<double>, 3> gyro;   // deg/s
  std::vector<double> force;                 // N
  double sample_rate = kNominalRateHz;
  std::string subject_id;
  WritingTask task = WritingTask::Text;
  std::optional<AgeGroup> age_group;

  std::size_t size() const noexcept { return t.size(); }
  double duration() const noexcept { return t.empty() ? 0.0 : t.back() - t.front(); }
};

// Throws Error{TooShort, NonMonotonicTime, NegativeForce, MalformedInput}.
void validate(const PenRecording& rec);

enum class RecordingFormat { Csv, Json };

PenRecording load_recording(std::istream& source, RecordingFormat format);
PenRecording load_recording_file(const std::string& path);

// Writes the `t,ax,ay,az,gx,gy,gz,f` CSV with shortest round-trip doubles.
void write_recording_csv(std::ostream& out, const PenRecording& rec);
void write_recording_json(std::ostream& out, const PenRecording& rec);

// Linear interpolation onto t_k = k / target_hz.
PenRecording resample_uniform(const PenRecording& rec, double target_hz);

// Half-open sample interval [begin, end).
struct Interval {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - begin; }
  bool operator==(const Interval&) const = default;
};

struct SegmentationParams {
  double force_threshold = 0.05;  // N, stroke entry level
  double hysteresis_ratio = 0.8;  // stroke exit level = ratio * threshold
  double min_stroke = 0.04;       // s
  double pause_cutoff = 2.0;      // s
};

struct StrokeSegmentation {
  std::vector<Interval> strokes;
  std::vector<Interval> in_air;   // gaps with duration <= pause_cutoff
  std::vector<Interval> pauses;   // gaps with duration > pause_cutoff
  std::vector<Interval> boundary; // leading/trailing non-writing tracts
  double pause_cutoff = 2.0;
  double sample_rate = kNominalRateHz;

  double seconds(const Interval& iv) const noexcept {
    return static_cast<double>(iv.length()) / sample_rate;
  }
  // Sample mask that is true outside pauses.
  std::vector<bool> non_pause_mask(std::size_t n) const;
};

StrokeSegmentation segment_force(std::span<const double> force, double sample_rate,
                                 const SegmentationParams& params = {});

StrokeSegmentation segment_strokes(const PenRecording& rec,
                                   const SegmentationParams& params = {});

}  // namespace pentrace
