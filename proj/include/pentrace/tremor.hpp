#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "pentrace/recording.hpp"

namespace pentrace {

struct TremorWindows {
  std::vector<std::vector<double>> windows;  // mean-removed |accel| segments
  std::size_t window_len = 500;
};

// Drops pause samples, takes the Euclidean accelerometer magnitude and cuts it
// into non-overlapping windows; the trailing remainder is discarded.
TremorWindows make_windows(const PenRecording& rec, const StrokeSegmentation& seg,
                           std::size_t window_len = 500);

struct EmdParams {
  int max_imfs = 10;
  double sift_tol = 0.2;     // stop sifting when SD drops below this
  int max_sift_iter = 100;   // SiftDiverged beyond this
  int mirror_extrema = 2;    // extrema reflected at each boundary
};

struct EmdResult {
  std::vector<std::vector<double>> imfs;
  std::vector<double> residual;
};

EmdResult emd(std::span<const double> signal, const EmdParams& params = {});

// Analytic signal x + i*H[x] via the frequency-domain Hilbert transform.
std::vector<std::complex<double>> analytic_signal(std::span<const double> x);

struct HhtSpectrum {
  std::vector<double> freqs;  // bin centres, Hz
  std::vector<double> power;  // accumulated squared instantaneous amplitude
  int n_imfs = 0;
};

// Hilbert marginal spectrum on a fixed grid of `bin_width` Hz bins spanning
// [0, sample_rate / 2].
HhtSpectrum hht_spectrum(std::span<const double> window, double sample_rate = 50.0,
                         const EmdParams& params = {}, double bin_width = 0.5);

// Mean over windows of the peak-bin frequency; ties go to the lower bin and
// all-zero spectra are skipped (AllZeroSpectra if none remain).
double modal_frequency(std::span<const HhtSpectrum> spectra);

// Mean over windows of the RMS of the spectral power bins.
double tremor_rms(std::span<const HhtSpectrum> spectra);

// Pincus ApEn(m, r = r_factor * SD) with Chebyshev distance and self-matches.
// Zero-SD input yields 0.
double approximate_entropy(std::span<const double> x, int m = 2, double r_factor = 0.2);

struct RqaParams {
  int dim = 3;
  int delay = 2;
  double eps_factor = 0.5;
  int l_min = 2;
};

// Radius used when the window has zero spread, so that identical points recur.
inline constexpr double kRqaEpsFloor = 1e-12;

struct RqaResult {
  double rr = 0.0;
  double det = 0.0;
};

RqaResult rqa(std::span<const double> x, const RqaParams& params = {});

struct TremorParams {
  std::size_t window_len = 500;
  EmdParams emd;
  double bin_width = 0.5;
  int apen_m = 2;
  double apen_r_factor = 0.2;
  RqaParams rqa;
};

struct TremorFeatures {
  double f_modal = 0.0;
  double rms = 0.0;
  double apen = 0.0;
  double rr = 0.0;
  double det = 0.0;
};

TremorFeatures tremor_features(const PenRecording& rec, const StrokeSegmentation& seg,
                               const TremorParams& params = {});

}  // namespace pentrace
