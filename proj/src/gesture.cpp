#include "pentrace/gesture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "pentrace/error.hpp"

namespace pentrace {

namespace {

using Vec3 = std::array<double, 3>;

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
// Below this specific-force magnitude the accelerometer carries no usable
// gravity direction and the filter runs on the gyro alone.
constexpr double kFreeFallAccel = 1.0;  // m/s^2

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Rotates v by `angle` about unit axis k (Rodrigues).
Vec3 rotate(const Vec3& v, const Vec3& k, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const Vec3 kxv = cross(k, v);
  const double kdv = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
  Vec3 out;
  for (int i = 0; i < 3; ++i) out[i] = v[i] * c + kxv[i] * s + k[i] * kdv * (1.0 - c);
  return out;
}

double tilt_from_up(const Vec3& up) {
  const double z = std::clamp(std::abs(up[2]) / norm(up), 0.0, 1.0);
  return std::asin(z) * kRadToDeg;
}

void require_strokes(const StrokeSegmentation& seg) {
  if (seg.strokes.empty()) throw Error(ErrorCode::EmptyWriting, "segmentation has no strokes");
}

}  // namespace

TemporalIndicators temporal_indicators(const StrokeSegmentation& seg) {
  require_strokes(seg);
  TemporalIndicators out;
  double sum = 0.0;
  for (const auto& s : seg.strokes) sum += seg.seconds(s);
  out.on_sheet = sum / static_cast<double>(seg.strokes.size());
  if (!seg.in_air.empty()) {
    double gaps = 0.0;
    for (const auto& g : seg.in_air) gaps += seg.seconds(g);
    out.in_air = gaps / static_cast<double>(seg.in_air.size());
  }
  out.air_sheet_ratio = out.in_air / out.on_sheet;
  return out;
}

std::vector<double> tilt_trace(const PenRecording& rec, double alpha) {
  const std::size_t n = rec.size();
  std::vector<double> tilt(n, 0.0);
  if (n == 0) return tilt;

  auto accel_at = [&](std::size_t i) -> Vec3 {
    return {rec.accel[0][i], rec.accel[1][i], rec.accel[2][i]};
  };
  auto gyro_at = [&](std::size_t i) -> Vec3 {
    return {rec.gyro[0][i] * kDegToRad, rec.gyro[1][i] * kDegToRad, rec.gyro[2][i] * kDegToRad};
  };

  // Gravity ("up") direction in the pen frame.
  Vec3 up{0.0, 0.0, 1.0};
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 a = accel_at(i);
    const double an = norm(a);
    if (an >= kFreeFallAccel) {
      up = {a[0] / an, a[1] / an, a[2] / an};
      break;
    }
  }
  tilt[0] = tilt_from_up(up);

  for (std::size_t i = 1; i < n; ++i) {
    const double dt = rec.t[i] - rec.t[i - 1];
    const Vec3 w0 = gyro_at(i - 1);
    const Vec3 w1 = gyro_at(i);
    const Vec3 w{0.5 * (w0[0] + w1[0]), 0.5 * (w0[1] + w1[1]), 0.5 * (w0[2] + w1[2])};
    const double rate = norm(w);
    // A world-fixed vector seen from a frame rotating at w turns at -w.
    if (rate > 0.0) up = rotate(up, {w[0] / rate, w[1] / rate, w[2] / rate}, -rate * dt);

    const Vec3 a = accel_at(i);
    const double an = norm(a);
    if (an >= kFreeFallAccel) {
      for (int k = 0; k < 3; ++k) up[k] = alpha * up[k] + (1.0 - alpha) * a[k] / an;
    }
    const double un = norm(up);
    for (double& v : up) v /= un;
    tilt[i] = tilt_from_up(up);
  }
  return tilt;
}

TiltSeries estimate_tilt(const PenRecording& rec, const StrokeSegmentation& seg, double alpha) {
  const auto full = tilt_trace(rec, alpha);
  const auto mask = seg.non_pause_mask(full.size());
  TiltSeries out;
  out.filter_alpha = alpha;
  out.tilt.reserve(full.size());
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (mask[i]) out.tilt.push_back(full[i]);
  }
  return out;
}

TiltStats tilt_stats(std::span<const double> tilt) {
  if (tilt.empty()) throw Error(ErrorCode::InvalidArgument, "empty tilt series");
  const double n = static_cast<double>(tilt.size());
  const double mean = std::accumulate(tilt.begin(), tilt.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : tilt) ss += (v - mean) * (v - mean);
  TiltStats out;
  out.mean = mean;
  out.var = ss / n;
  if (mean != 0.0) out.cv = std::sqrt(out.var) / mean;
  return out;
}

int count_turning_points(std::span<const double> x, double prominence) {
  if (x.size() < 3) return 0;
  enum class Dir { Unknown, Up, Down };
  Dir dir = Dir::Unknown;
  int count = 0;

  double hi = x[0], lo = x[0];
  std::size_t hi_idx = 0, lo_idx = 0;
  double ext = x[0];

  for (std::size_t i = 1; i < x.size(); ++i) {
    const double v = x[i];
    switch (dir) {
      case Dir::Unknown:
        if (v > hi) { hi = v; hi_idx = i; }
        if (v < lo) { lo = v; lo_idx = i; }
        if (v <= hi - prominence) {
          if (hi_idx > 0) ++count;
          dir = Dir::Down;
          ext = v;
        } else if (v >= lo + prominence) {
          if (lo_idx > 0) ++count;
          dir = Dir::Up;
          ext = v;
        }
        break;
      case Dir::Up:
        if (v > ext) {
          ext = v;
        } else if (v <= ext - prominence) {
          ++count;
          dir = Dir::Down;
          ext = v;
        }
        break;
      case Dir::Down:
        if (v < ext) {
          ext = v;
        } else if (v >= ext + prominence) {
          ++count;
          dir = Dir::Up;
          ext = v;
        }
        break;
    }
  }
  return count;
}

int stroke_extrema(std::span<const double> x, double prominence) {
  return std::max(1, count_turning_points(x, prominence));
}

ForceIndicators force_indicators(const PenRecording& rec, const StrokeSegmentation& seg,
                                 double prominence) {
  require_strokes(seg);
  const std::span<const double> force(rec.force);
  double sum = 0.0;
  std::size_t samples = 0;
  double extrema = 0.0;
  for (const auto& s : seg.strokes) {
    const auto part = force.subspan(s.begin, s.length());
    sum += std::accumulate(part.begin(), part.end(), 0.0);
    samples += part.size();
    extrema += stroke_extrema(part, prominence);
  }
  return {sum / static_cast<double>(samples),
          extrema / static_cast<double>(seg.strokes.size())};
}

double smoothness_indicator(const PenRecording& rec, const StrokeSegmentation& seg,
                            double prominence) {
  require_strokes(seg);
  std::vector<double> mag;
  double extrema = 0.0;
  for (const auto& s : seg.strokes) {
    mag.clear();
    for (std::size_t i = s.begin; i < s.end; ++i) {
      mag.push_back(std::sqrt(rec.accel[0][i] * rec.accel[0][i] +
                              rec.accel[1][i] * rec.accel[1][i] +
                              rec.accel[2][i] * rec.accel[2][i]));
    }
    extrema += stroke_extrema(mag, prominence);
  }
  return extrema / static_cast<double>(seg.strokes.size());
}

GestureFeatures gesture_features(const PenRecording& rec, const StrokeSegmentation& seg,
                                 const GestureParams& params) {
  const auto temporal = temporal_indicators(seg);
  const auto tilt = estimate_tilt(rec, seg, params.tilt_alpha);
  const auto stats = tilt_stats(tilt.tilt);
  const auto force = force_indicators(rec, seg, params.force_prominence);

  GestureFeatures out;
  out.on_sheet = temporal.on_sheet;
  out.in_air = temporal.in_air;
  out.air_sheet_ratio = temporal.air_sheet_ratio;
  out.tilt_mean = stats.mean;
  out.tilt_cv = stats.cv;
  out.tilt_var = stats.var;
  out.force = force.force;
  out.ncf = force.ncf;
  out.nca = smoothness_indicator(rec, seg, params.accel_prominence);
  return out;
}

}  // namespace pentrace
