#include "pentrace/features.hpp"

namespace pentrace {

FeatureVector assemble_features(const GestureFeatures& g, const TremorFeatures& t) {
  FeatureVector fv;
  fv[Indicator::OnSheet] = g.on_sheet;
  fv[Indicator::InAir] = g.in_air;
  fv[Indicator::AirSheetR] = g.air_sheet_ratio;
  fv[Indicator::TiltMean] = g.tilt_mean;
  fv[Indicator::TiltCV] = g.tilt_cv;
  fv[Indicator::TiltVar] = g.tilt_var;
  fv[Indicator::Force] = g.force;
  fv[Indicator::NCF] = g.ncf;
  fv[Indicator::NCA] = g.nca;
  fv[Indicator::FModal] = t.f_modal;
  fv[Indicator::RMS] = t.rms;
  fv[Indicator::ApEn] = t.apen;
  fv[Indicator::RR] = t.rr;
  fv[Indicator::DET] = t.det;
  return fv;
}

FeatureVector extract_features(const PenRecording& rec, const ExtractionParams& params) {
  const PenRecording uniform = resample_uniform(rec, params.sample_rate);
  const StrokeSegmentation seg = segment_strokes(uniform, params.segmentation);
  return assemble_features(gesture_features(uniform, seg, params.gesture),
                           tremor_features(uniform, seg, params.tremor));
}

}  // namespace pentrace
