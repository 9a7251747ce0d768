#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pentrace/recording.hpp"

namespace pentrace {

// Generative parameters of one age-group archetype. Durations in seconds,
// force in N, angles in degrees, accelerations in m/s^2.
struct GroupParams {
  double stroke_mean = 0.35;
  double stroke_sd = 0.08;
  double gap_mean = 0.30;   // in-air gap, lognormal
  double gap_sd = 0.10;
  double pause_rate = 0.03;  // chance that a gap becomes a pause
  double pause_mean = 3.5;
  double force_level = 1.6;
  double force_sd = 0.25;   // stroke-to-stroke spread
  double force_wiggle = 4.0;  // force oscillations per second within a stroke
  double tilt_mean = 55.0;
  double tilt_jitter = 3.0;
  double move_freq = 4.0;   // writing-movement acceleration
  double move_amp = 1.2;
  double tremor_freq = 7.0;
  double tremor_amp = 0.15;
  double tremor_regularity = 0.3;  // 0 = pink noise only, 1 = pure tone
  double noise_floor = 0.02;
  // Between-subject spread, as a fraction of the group value.
  double subject_spread = 0.12;
  // Degrees of freedom of the Student-t behind subject traits; small values
  // give occasional atypical writers.
  int tail_dof = 3;
  // Between-subject spread of the habitual tilt (degrees) and of the force
  // level (fraction); both widen with age.
  double tilt_spread = 3.0;
  double gap_spread = 0.12;  // log-scale spread of the habitual in-air gap
  double atypical_rate = 0.1;
  double atypical_gap_factor = 3.0;
  double force_spread = 0.12;
};

struct CohortConfig {
  std::array<GroupParams, 4> groups;  // YY, EY, EF, EE
  std::size_t subjects_per_group = 20;
  std::uint64_t seed = 42;
  double text_duration = 40.0;
  double list_duration = 25.0;
  double sample_rate = kNominalRateHz;
  // Scales every group's departure from the YY archetype; 0 makes all
  // groups identical.
  double gap_scale = 1.0;

  static CohortConfig defaults();
  GroupParams effective(AgeGroup g) const;
};

struct SubjectSpec {
  std::string subject_id;
  AgeGroup group = AgeGroup::YY;
  WritingTask task = WritingTask::Text;
  std::uint64_t seed = 0;  // per subject, shared by both tasks
};

// Noise-free generation knobs used by construction tests.
struct GenerateOptions {
  bool noiseless = false;  // no tremor, sensor noise or force jitter
};

struct GeneratedRecording {
  PenRecording recording;
  std::size_t scheduled_strokes = 0;
};

// Personal traits come from subject_seed alone, so a subject's two tasks
// share them; the signal itself is drawn from a per-task stream.
GeneratedRecording generate_subject(const GroupParams& params, WritingTask task, double duration,
                                    double sample_rate, std::uint64_t subject_seed,
                                    const GenerateOptions& options = {});

std::string subject_id_for(AgeGroup g, std::size_t index);

// Every (group, subject, task) with its derived seed, in manifest order.
std::vector<SubjectSpec> cohort_plan(const CohortConfig& cfg);

PenRecording generate_for(const SubjectSpec& spec, const CohortConfig& cfg);

std::string recording_file_name(const SubjectSpec& spec);

struct ManifestEntry {
  SubjectSpec spec;
  std::string file;
  std::string sha256;
};

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(std::istream& in);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace pentrace
