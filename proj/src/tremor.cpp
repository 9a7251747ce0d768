#include "pentrace/tremor.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>

#include <fftw3.h>

#include "pentrace/error.hpp"

namespace pentrace {

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double population_sd(std::span<const double> x) {
  const double mu = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

// ---------------------------------------------------------------------------
// Extrema and envelopes

struct Extrema {
  std::vector<std::size_t> maxima;
  std::vector<std::size_t> minima;
};

// Strict local extrema; a flat run is reported once, at its middle sample.
Extrema find_extrema(std::span<const double> h) {
  Extrema ex;
  const std::size_t n = h.size();
  std::size_t i = 1;
  while (i + 1 < n) {
    std::size_t j = i;
    while (j + 1 < n && h[j + 1] == h[i]) ++j;
    if (j + 1 >= n) break;
    const double left = h[i - 1];
    const double right = h[j + 1];
    if (h[i] > left && h[i] > right) ex.maxima.push_back((i + j) / 2);
    if (h[i] < left && h[i] < right) ex.minima.push_back((i + j) / 2);
    i = j + 1;
  }
  return ex;
}

// Natural cubic spline through (xs, ys) evaluated at 0..n-1.
std::vector<double> natural_spline(const std::vector<double>& xs, const std::vector<double>& ys,
                                   std::size_t n) {
  const std::size_t k = xs.size();
  std::vector<double> out(n);
  if (k == 1) {
    std::fill(out.begin(), out.end(), ys[0]);
    return out;
  }
  std::vector<double> h(k - 1);
  for (std::size_t i = 0; i + 1 < k; ++i) h[i] = xs[i + 1] - xs[i];

  // Second derivatives M with M_0 = M_{k-1} = 0; Thomas algorithm.
  std::vector<double> m(k, 0.0);
  if (k > 2) {
    const std::size_t inner = k - 2;
    std::vector<double> diag(inner), upper(inner), rhs(inner);
    for (std::size_t i = 0; i < inner; ++i) {
      diag[i] = 2.0 * (h[i] + h[i + 1]);
      upper[i] = h[i + 1];
      rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
    }
    for (std::size_t i = 1; i < inner; ++i) {
      const double w = h[i] / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    m[inner] = rhs[inner - 1] / diag[inner - 1];
    for (std::size_t i = inner - 1; i-- > 0;) {
      m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
    }
  }

  std::size_t seg = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const double x = static_cast<double>(p);
    while (seg + 2 < k && xs[seg + 1] < x) ++seg;
    const double hi = h[seg];
    const double a = (xs[seg + 1] - x) / hi;
    const double b = (x - xs[seg]) / hi;
    out[p] = a * ys[seg] + b * ys[seg + 1] +
             ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * hi * hi / 6.0;
  }
  return out;
}

// Extremum location and value refined from the sample and its two
// neighbours. Three samples of a sinusoid satisfy a + c = 2 b cos(w), which
// fixes the local frequency, amplitude and peak offset exactly; a parabola is
// the fallback. Without this, near-Nyquist tones leave a sampling beat in
// the envelopes.
std::pair<double, double> refine_extremum(std::span<const double> h, std::size_t i) {
  if (i == 0 || i + 1 >= h.size()) return {static_cast<double>(i), h[i]};
  const double a = h[i - 1], b = h[i], c = h[i + 1];
  if (b != 0.0) {
    const double r = (a + c) / (2.0 * b);
    if (r > -1.0 && r < 1.0) {
      const double w = std::acos(r);
      const double s = (a - c) / (2.0 * std::sin(w));
      const double delta = -std::atan2(s, std::abs(b)) / w;
      if (std::abs(delta) <= 0.5) {
        return {static_cast<double>(i) + delta, std::copysign(std::hypot(b, s), b)};
      }
    }
  }
  const double curvature = a - 2.0 * b + c;
  if (curvature == 0.0) return {static_cast<double>(i), b};
  const double delta = std::clamp(0.5 * (a - c) / curvature, -0.5, 0.5);
  return {static_cast<double>(i) + delta, b - 0.25 * (a - c) * delta};
}

// Envelope through the given extrema, with `mirror` extrema reflected about
// each end sample so the spline spans the whole window.
std::vector<double> envelope(std::span<const double> h, const std::vector<std::size_t>& idx,
                             int mirror) {
  const std::size_t n = h.size();
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(mirror), idx.size());
  std::vector<std::pair<double, double>> pts;
  pts.reserve(idx.size());
  for (std::size_t i : idx) pts.push_back(refine_extremum(h, i));
  std::vector<double> xs, ys;
  xs.reserve(idx.size() + 2 * count);
  ys.reserve(xs.capacity());
  for (std::size_t r = count; r-- > 0;) {
    xs.push_back(-pts[r].first);
    ys.push_back(pts[r].second);
  }
  for (const auto& [x, y] : pts) {
    xs.push_back(x);
    ys.push_back(y);
  }
  const double last = static_cast<double>(n - 1);
  for (std::size_t r = 0; r < count; ++r) {
    const auto& [x, y] = pts[pts.size() - 1 - r];
    xs.push_back(2.0 * last - x);
    ys.push_back(y);
  }
  return natural_spline(xs, ys, n);
}

bool can_sift(const Extrema& ex) { return !ex.maxima.empty() && !ex.minima.empty(); }

std::vector<double> sift(std::vector<double> h, const EmdParams& params) {
  for (int iter = 0;; ++iter) {
    const Extrema ex = find_extrema(h);
    if (!can_sift(ex)) return h;
    const auto upper = envelope(h, ex.maxima, params.mirror_extrema);
    const auto lower = envelope(h, ex.minima, params.mirror_extrema);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double mean = 0.5 * (upper[i] + lower[i]);
      num += mean * mean;
      den += h[i] * h[i];
      h[i] -= mean;
    }
    const double sd = den > 0.0 ? num / den : 0.0;
    if (sd < params.sift_tol) return h;
    if (iter + 1 >= params.max_sift_iter) {
      throw Error(ErrorCode::SiftDiverged,
                  "sifting did not converge in " + std::to_string(params.max_sift_iter) +
                      " iterations");
    }
  }
}

// ---------------------------------------------------------------------------
// FFT

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Planning in FFTW is not thread safe; execution on distinct buffers is.
void run_fft(std::vector<std::complex<double>>& data, int sign) {
  const int n = static_cast<int>(data.size());
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(n, buf, buf, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace

TremorWindows make_windows(const PenRecording& rec, const StrokeSegmentation& seg,
                           std::size_t window_len) {
  const auto mask = seg.non_pause_mask(rec.size());
  std::vector<double> mag;
  mag.reserve(rec.size());
  for (std::size_t i = 0; i < rec.size(); ++i) {
    if (!mask[i]) continue;
    mag.push_back(std::sqrt(rec.accel[0][i] * rec.accel[0][i] + rec.accel[1][i] * rec.accel[1][i] +
                            rec.accel[2][i] * rec.accel[2][i]));
  }
  if (window_len == 0 || mag.size() < window_len) {
    throw Error(ErrorCode::TooShortForTremor,
                std::to_string(mag.size()) + " non-pause samples, need " +
                    std::to_string(window_len));
  }
  TremorWindows out;
  out.window_len = window_len;
  for (std::size_t start = 0; start + window_len <= mag.size(); start += window_len) {
    std::vector<double> w(mag.begin() + static_cast<std::ptrdiff_t>(start),
                          mag.begin() + static_cast<std::ptrdiff_t>(start + window_len));
    const double mu = mean_of(w);
    for (double& v : w) v -= mu;
    out.windows.push_back(std::move(w));
  }
  return out;
}

EmdResult emd(std::span<const double> signal, const EmdParams& params) {
  if (signal.size() < 16) {
    throw Error(ErrorCode::InvalidArgument, "EMD needs at least 16 samples");
  }
  for (double v : signal) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "EMD input not finite");
  }
  EmdResult out;
  out.residual.assign(signal.begin(), signal.end());
  while (static_cast<int>(out.imfs.size()) < params.max_imfs) {
    if (!can_sift(find_extrema(out.residual))) break;
    auto imf = sift(out.residual, params);
    for (std::size_t i = 0; i < imf.size(); ++i) out.residual[i] -= imf[i];
    out.imfs.push_back(std::move(imf));
  }
  return out;
}

std::vector<std::complex<double>> analytic_signal(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> z(x.begin(), x.end());
  if (n == 0) return z;
  run_fft(z, FFTW_FORWARD);
  // Keep DC (and Nyquist for even n), double positive frequencies, zero the rest.
  const std::size_t half = n / 2;
  for (std::size_t k = 1; k < n; ++k) {
    if (k < (n + 1) / 2) {
      z[k] *= 2.0;
    } else if (!(n % 2 == 0 && k == half)) {
      z[k] = 0.0;
    }
  }
  run_fft(z, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(n);
  for (auto& v : z) v *= scale;
  return z;
}

HhtSpectrum hht_spectrum(std::span<const double> window, double sample_rate,
                         const EmdParams& params, double bin_width) {
  const double nyquist = sample_rate / 2.0;
  const auto n_bins = static_cast<std::size_t>(std::ceil(nyquist / bin_width - 1e-9));
  HhtSpectrum spec;
  spec.freqs.resize(n_bins);
  spec.power.assign(n_bins, 0.0);
  for (std::size_t b = 0; b < n_bins; ++b) spec.freqs[b] = (static_cast<double>(b) + 0.5) * bin_width;

  const EmdResult decomposition = emd(window, params);
  spec.n_imfs = static_cast<int>(decomposition.imfs.size());
  const double to_hz = sample_rate / (2.0 * std::numbers::pi);
  for (const auto& imf : decomposition.imfs) {
    const auto z = analytic_signal(imf);
    double prev_phase = std::arg(z[0]);
    for (std::size_t t = 0; t + 1 < z.size(); ++t) {
      const double next_phase = std::arg(z[t + 1]);
      double dphi = next_phase - prev_phase;
      dphi -= 2.0 * std::numbers::pi * std::round(dphi / (2.0 * std::numbers::pi));
      prev_phase = next_phase;
      const double freq = std::clamp(dphi * to_hz, 0.0, nyquist);
      const auto bin = std::min(n_bins - 1, static_cast<std::size_t>(freq / bin_width));
      spec.power[bin] += std::norm(z[t]);
    }
  }
  return spec;
}

double modal_frequency(std::span<const HhtSpectrum> spectra) {
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& s : spectra) {
    const auto peak = std::max_element(s.power.begin(), s.power.end());
    if (peak == s.power.end() || !(*peak > 0.0)) continue;
    sum += s.freqs[static_cast<std::size_t>(peak - s.power.begin())];
    ++used;
  }
  if (used == 0) throw Error(ErrorCode::AllZeroSpectra, "no spectrum with nonzero power");
  return sum / static_cast<double>(used);
}

double tremor_rms(std::span<const HhtSpectrum> spectra) {
  if (spectra.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : spectra) {
    double sq = 0.0;
    for (double p : s.power) sq += p * p;
    sum += s.power.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(s.power.size()));
  }
  return sum / static_cast<double>(spectra.size());
}

double approximate_entropy(std::span<const double> x, int m, double r_factor) {
  const std::size_t n = x.size();
  const auto mm = static_cast<std::size_t>(m);
  if (n < mm + 2) throw Error(ErrorCode::InvalidArgument, "series too short for ApEn");
  const double sd = population_sd(x);
  if (sd == 0.0) return 0.0;
  const double r = r_factor * sd;

  // Templates of length m start at 0..n-m, of length m+1 at 0..n-m-1.
  const std::size_t n_m = n - mm + 1;
  const std::size_t n_m1 = n - mm;
  std::vector<std::size_t> c_m(n_m, 0), c_m1(n_m1, 0);
  for (std::size_t i = 0; i < n_m; ++i) {
    for (std::size_t j = i; j < n_m; ++j) {
      bool match = true;
      for (std::size_t k = 0; k < mm && match; ++k) match = std::abs(x[i + k] - x[j + k]) <= r;
      if (!match) continue;
      c_m[i] += 1;
      if (j != i) c_m[j] += 1;
      if (i < n_m1 && j < n_m1 && std::abs(x[i + mm] - x[j + mm]) <= r) {
        c_m1[i] += 1;
        if (j != i) c_m1[j] += 1;
      }
    }
  }
  auto phi = [](const std::vector<std::size_t>& counts) {
    const double total = static_cast<double>(counts.size());
    double acc = 0.0;
    for (std::size_t c : counts) acc += std::log(static_cast<double>(c) / total);
    return acc / total;
  };
  return phi(c_m) - phi(c_m1);
}

RqaResult rqa(std::span<const double> x, const RqaParams& params) {
  const auto dim = static_cast<std::size_t>(params.dim);
  const auto delay = static_cast<std::size_t>(params.delay);
  if (x.size() < dim * delay + 10) {
    throw Error(ErrorCode::TooShortForRqa, "series of " + std::to_string(x.size()) +
                                               " samples too short for RQA");
  }
  const std::size_t m = x.size() - (dim - 1) * delay;
  const double eps = std::max(params.eps_factor * population_sd(x), kRqaEpsFloor);
  const auto l_min = static_cast<std::size_t>(std::max(1, params.l_min));

  auto recurrent = [&](std::size_t i, std::size_t j) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = x[i + k * delay] - x[j + k * delay];
      d2 += d * d;
    }
    return std::sqrt(d2) <= eps;
  };

  // Upper triangle only; the matrix is symmetric.
  std::size_t points = 0;
  std::size_t on_lines = 0;
  for (std::size_t offset = 1; offset < m; ++offset) {
    std::size_t run = 0;
    for (std::size_t i = 0; i + offset < m; ++i) {
      if (recurrent(i, i + offset)) {
        ++run;
        ++points;
      } else {
        if (run >= l_min) on_lines += run;
        run = 0;
      }
    }
    if (run >= l_min) on_lines += run;
  }
  RqaResult out;
  const double off_diagonal = static_cast<double>(m) * static_cast<double>(m - 1);
  out.rr = 2.0 * static_cast<double>(points) / off_diagonal;
  out.det = points == 0 ? 0.0 : static_cast<double>(on_lines) / static_cast<double>(points);
  return out;
}

TremorFeatures tremor_features(const PenRecording& rec, const StrokeSegmentation& seg,
                               const TremorParams& params) {
  const TremorWindows tw = make_windows(rec, seg, params.window_len);
  std::vector<HhtSpectrum> spectra;
  spectra.reserve(tw.windows.size());
  double apen = 0.0;
  double rr = 0.0;
  double det = 0.0;
  for (const auto& w : tw.windows) {
    spectra.push_back(hht_spectrum(w, rec.sample_rate, params.emd, params.bin_width));
    apen += approximate_entropy(w, params.apen_m, params.apen_r_factor);
    const RqaResult r = rqa(w, params.rqa);
    rr += r.rr;
    det += r.det;
  }
  const double count = static_cast<double>(tw.windows.size());
  TremorFeatures out;
  out.f_modal = modal_frequency(spectra);
  out.rms = tremor_rms(spectra);
  out.apen = apen / count;
  out.rr = rr / count;
  out.det = det / count;
  return out;
}

}  // namespace pentrace
