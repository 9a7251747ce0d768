#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pentrace/recording.hpp"

namespace pentrace {

struct TemporalIndicators {
  double on_sheet = 0.0;         // mean stroke duration, s
  double in_air = 0.0;           // mean in-air gap duration, s (0 without gaps)
  double air_sheet_ratio = 0.0;  // in_air / on_sheet
};

TemporalIndicators temporal_indicators(const StrokeSegmentation& seg);

struct TiltSeries {
  std::vector<double> tilt;  // deg, pause samples removed
  double filter_alpha = 0.98;
};

// Per-sample tilt for the whole recording (no pause removal). Complementary
// filter on the gravity direction expressed in the pen frame; the pen's long
// axis is the sensor z axis.
std::vector<double> tilt_trace(const PenRecording& rec, double alpha);

TiltSeries estimate_tilt(const PenRecording& rec, const StrokeSegmentation& seg,
                         double alpha = 0.98);

struct TiltStats {
  double mean = 0.0;
  std::optional<double> cv;  // missing when mean == 0
  double var = 0.0;          // population variance
};

TiltStats tilt_stats(std::span<const double> tilt);

// Number of prominence-confirmed turning points (local maxima and minima) in
// the interior of `x`. A candidate extremum counts once the signal has moved
// away from it by at least `prominence`; endpoints never count.
int count_turning_points(std::span<const double> x, double prominence);

// Per-stroke extremum count with the flat-stroke policy: never below 1.
int stroke_extrema(std::span<const double> x, double prominence);

struct ForceIndicators {
  double force = 0.0;  // mean in-stroke force, N
  double ncf = 0.0;    // mean extrema per stroke
};

ForceIndicators force_indicators(const PenRecording& rec, const StrokeSegmentation& seg,
                                 double prominence = 0.05);

double smoothness_indicator(const PenRecording& rec, const StrokeSegmentation& seg,
                            double prominence = 0.2);

struct GestureParams {
  double tilt_alpha = 0.98;
  double force_prominence = 0.05;  // N
  double accel_prominence = 0.2;   // m/s^2
};

struct GestureFeatures {
  double on_sheet = 0.0;
  double in_air = 0.0;
  double air_sheet_ratio = 0.0;
  double tilt_mean = 0.0;
  std::optional<double> tilt_cv;
  double tilt_var = 0.0;
  double force = 0.0;
  double ncf = 0.0;
  double nca = 0.0;
};

GestureFeatures gesture_features(const PenRecording& rec, const StrokeSegmentation& seg,
                                 const GestureParams& params = {});

}  // namespace pentrace
