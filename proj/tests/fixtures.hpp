#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pentrace/recording.hpp"

namespace fixture {

inline constexpr double kGravity = 9.81;

// Stationary vertical pen with zero force; callers fill in what they need.
inline pentrace::PenRecording still_pen(std::size_t n, double rate = 50.0) {
  pentrace::PenRecording rec;
  rec.sample_rate = rate;
  rec.t.resize(n);
  for (std::size_t i = 0; i < n; ++i) rec.t[i] = static_cast<double>(i) / rate;
  for (auto& ch : rec.accel) ch.assign(n, 0.0);
  for (auto& ch : rec.gyro) ch.assign(n, 0.0);
  rec.accel[2].assign(n, kGravity);
  rec.force.assign(n, 0.0);
  rec.subject_id = "T01";
  return rec;
}

// Square wave: `cycles` strokes of `on` seconds at `level` N separated by
// `off` seconds of zero force, with `lead` seconds of silence at both ends.
inline std::vector<double> square_force(int cycles, double on, double off, double rate,
                                        double lead = 0.5, double level = 1.0) {
  std::vector<double> f;
  auto push = [&](double seconds, double value) {
    const auto n = static_cast<std::size_t>(std::lround(seconds * rate));
    f.insert(f.end(), n, value);
  };
  push(lead, 0.0);
  for (int c = 0; c < cycles; ++c) {
    push(on, level);
    if (c + 1 < cycles) push(off, 0.0);
  }
  push(lead, 0.0);
  return f;
}

inline pentrace::PenRecording with_force(const std::vector<double>& force, double rate = 50.0) {
  auto rec = still_pen(force.size(), rate);
  rec.force = force;
  return rec;
}

inline std::vector<double> tone(double freq, std::size_t n, double rate = 50.0,
                                double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate + phase);
  }
  return x;
}

// Per-test scratch directory under the system temp dir, wiped on entry.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pentrace_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture
