#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "pentrace/gesture.hpp"
#include "pentrace/recording.hpp"
#include "pentrace/tremor.hpp"

namespace pentrace {

inline constexpr std::size_t kNumIndicators = 14;

// Column order used everywhere a feature vector is serialised.
inline constexpr std::array<std::string_view, kNumIndicators> kIndicatorNames = {
    "OnSheet", "InAir", "AirSheetR", "TiltMean", "TiltCV", "TiltVar", "Force",
    "NCF",     "NCA",   "FModal",    "RMS",      "ApEn",   "RR",      "DET"};

enum class Indicator : std::size_t {
  OnSheet, InAir, AirSheetR, TiltMean, TiltCV, TiltVar, Force,
  NCF, NCA, FModal, RMS, ApEn, RR, DET
};

// One subject, one writing task. A value is empty when the indicator is
// undefined for the recording (e.g. TiltCV with zero mean tilt).
struct FeatureVector {
  std::array<std::optional<double>, kNumIndicators> values{};

  std::optional<double>& operator[](Indicator i) { return values[static_cast<std::size_t>(i)]; }
  const std::optional<double>& operator[](Indicator i) const {
    return values[static_cast<std::size_t>(i)];
  }
};

struct ExtractionParams {
  double sample_rate = kNominalRateHz;
  SegmentationParams segmentation;
  GestureParams gesture;
  TremorParams tremor;
};

FeatureVector assemble_features(const GestureFeatures& gesture, const TremorFeatures& tremor);

// Resample, segment and compute all 14 indicators.
FeatureVector extract_features(const PenRecording& rec, const ExtractionParams& params = {});

}  // namespace pentrace
