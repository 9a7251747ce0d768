#include "pentrace/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "pentrace/error.hpp"
#include "pentrace/numfmt.hpp"
#include "pentrace/rng.hpp"

namespace pentrace {

namespace {

constexpr double kGravity = 9.80665;
constexpr double kDeg = std::numbers::pi / 180.0;

// Every GroupParams field that varies across groups; gap_scale stretches
// these away from the YY archetype.
constexpr double GroupParams::* kScaledFields[] = {
    &GroupParams::stroke_mean,  &GroupParams::stroke_sd,    &GroupParams::gap_mean,
    &GroupParams::gap_sd,       &GroupParams::pause_rate,   &GroupParams::force_level,
    &GroupParams::force_sd,     &GroupParams::force_wiggle, &GroupParams::tilt_mean,
    &GroupParams::tilt_jitter,  &GroupParams::move_freq,    &GroupParams::move_amp,
    &GroupParams::tremor_freq,  &GroupParams::tremor_amp,   &GroupParams::tremor_regularity,
    &GroupParams::noise_floor,  &GroupParams::tilt_spread,  &GroupParams::force_spread,
    &GroupParams::gap_spread,
};

struct Quat {
  double w, x, y, z;
};

Quat mul(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quat conj(const Quat& q) { return {q.w, -q.x, -q.y, -q.z}; }

// Rotates v by q (body to world for the pen attitude).
std::array<double, 3> rotate(const Quat& q, const std::array<double, 3>& v) {
  const Quat p = mul(mul(q, Quat{0.0, v[0], v[1], v[2]}), conj(q));
  return {p.x, p.y, p.z};
}

// Pen attitude: body z is the long axis, elevated `tilt` above the table
// and turned `azimuth` about the vertical.
Quat attitude(double tilt, double azimuth) {
  const double pitch = 0.5 * (std::numbers::pi / 2.0 - tilt);
  const double yaw = 0.5 * azimuth;
  const Quat qz{std::cos(yaw), 0.0, 0.0, std::sin(yaw)};
  const Quat qy{std::cos(pitch), 0.0, std::sin(pitch), 0.0};
  return mul(qz, qy);
}

// Body-frame angular velocity (rad/s) taking q0 to q1 over dt.
std::array<double, 3> body_rate(const Quat& q0, const Quat& q1, double dt) {
  Quat d = mul(conj(q0), q1);
  if (d.w < 0.0) d = {-d.w, -d.x, -d.y, -d.z};
  const double s = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
  if (s == 0.0) return {0.0, 0.0, 0.0};
  const double angle = 2.0 * std::atan2(s, d.w);
  return {angle * d.x / s / dt, angle * d.y / s / dt, angle * d.z / s / dt};
}

// Kellet's economy pink-noise filter over unit normal draws, rescaled to
// unit RMS.
std::vector<double> pink_noise(Rng& rng, std::size_t n) {
  std::vector<double> out(n);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = rng.normal();
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    out[i] = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
    b6 = w * 0.115926;
    ss += out[i] * out[i];
  }
  const double rms = n > 0 ? std::sqrt(ss / static_cast<double>(n)) : 1.0;
  for (double& v : out) v /= rms;
  return out;
}

// Stationary AR(1) with time constant tau and standard deviation sd.
std::vector<double> slow_wander(Rng& rng, std::size_t n, double dt, double tau, double sd) {
  std::vector<double> out(n);
  const double phi = std::exp(-dt / tau);
  const double innov = sd * std::sqrt(1.0 - phi * phi);
  double v = sd * rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = v;
    v = phi * v + innov * rng.normal();
  }
  return out;
}

double lognormal(Rng& rng, double mean, double sd) {
  const double s2 = std::log1p((sd * sd) / (mean * mean));
  return std::exp(std::log(mean) - 0.5 * s2 + std::sqrt(s2) * rng.normal());
}

// Student-t draw with `dof` degrees of freedom, scaled to unit variance.
double heavy_tailed(Rng& rng, int dof) {
  double chi2 = 0.0;
  for (int i = 0; i < dof; ++i) {
    const double z = rng.normal();
    chi2 += z * z;
  }
  const double t = rng.normal() / std::sqrt(chi2 / dof);
  return dof > 2 ? t * std::sqrt((dof - 2.0) / dof) : t;
}

GroupParams personalize(const GroupParams& g, Rng& rng) {
  GroupParams p = g;
  const double s = g.subject_spread;
  auto jitter = [&](double v) { return v * std::exp(s * heavy_tailed(rng, g.tail_dof)); };
  p.stroke_mean = jitter(g.stroke_mean);
  p.gap_mean = g.gap_mean * std::exp(g.gap_spread * heavy_tailed(rng, g.tail_dof));
  // Atypical writers hesitate far longer between strokes than their group.
  if (rng.uniform() < g.atypical_rate) p.gap_mean *= g.atypical_gap_factor;
  p.gap_sd = p.gap_mean * (g.gap_sd / g.gap_mean);
  p.pause_rate = std::clamp(jitter(g.pause_rate), 0.0, 0.5);
  p.force_level = g.force_level * std::exp(g.force_spread * rng.normal());
  p.force_wiggle = jitter(g.force_wiggle);
  p.tilt_mean = std::clamp(g.tilt_mean + g.tilt_spread * rng.normal(), 20.0, 85.0);
  p.tilt_jitter = jitter(g.tilt_jitter);
  p.move_freq = jitter(g.move_freq);
  p.tremor_freq = std::clamp(jitter(g.tremor_freq), 2.0, 20.0);
  p.tremor_amp = jitter(g.tremor_amp);
  p.tremor_regularity = std::clamp(g.tremor_regularity + s * rng.normal(), 0.0, 0.98);
  return p;
}

struct Segment {
  double begin;
  double end;
};

}  // namespace

CohortConfig CohortConfig::defaults() {
  // Columns: YY, EY, EF, EE. In-air gaps lengthen with age and dominate
  // the group differences; older groups are also more heterogeneous and
  // include occasional writers with much longer gaps.
  struct Row {
    double GroupParams::* field;
    std::array<double, 4> value;
  };
  const Row rows[] = {
      {&GroupParams::stroke_mean, {0.33, 0.33, 0.34, 0.35}},
      {&GroupParams::gap_mean, {0.22, 0.34, 0.52, 0.80}},
      {&GroupParams::gap_sd, {0.07, 0.11, 0.17, 0.26}},
      {&GroupParams::atypical_rate, {0.0, 0.1, 0.1, 0.1}},
      {&GroupParams::pause_rate, {0.02, 0.03, 0.04, 0.05}},
      {&GroupParams::force_level, {1.60, 1.60, 1.55, 1.50}},
      {&GroupParams::force_spread, {0.05, 0.15, 0.25, 0.35}},
      {&GroupParams::force_wiggle, {3.3, 3.3, 3.4, 3.5}},
      {&GroupParams::tilt_mean, {55.0, 55.0, 57.0, 55.0}},
      {&GroupParams::tilt_spread, {1.5, 6.0, 11.0, 16.0}},
      {&GroupParams::move_freq, {4.5, 4.2, 3.9, 3.6}},
      {&GroupParams::tremor_freq, {6.5, 7.0, 7.5, 8.0}},
      {&GroupParams::tremor_amp, {0.15, 0.17, 0.20, 0.24}},
      {&GroupParams::tremor_regularity, {0.2, 0.3, 0.4, 0.5}},
  };
  CohortConfig cfg;
  for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
    for (const auto& row : rows) cfg.groups[g].*row.field = row.value[g];
  }
  return cfg;
}

GroupParams CohortConfig::effective(AgeGroup g) const {
  const GroupParams& base = groups[0];
  GroupParams out = groups[static_cast<std::size_t>(g)];
  for (auto field : kScaledFields) {
    out.*field = base.*field + gap_scale * (out.*field - base.*field);
  }
  return out;
}

GeneratedRecording generate_subject(const GroupParams& group, WritingTask task, double duration,
                                    double sample_rate, std::uint64_t subject_seed,
                                    const GenerateOptions& options) {
  if (!(duration > 0.0) || !(sample_rate > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "duration and sample_rate must be positive");
  }
  Rng trait_rng(derive_seed(subject_seed, 0));
  GroupParams p = personalize(group, trait_rng);
  if (options.noiseless) {
    p.tremor_amp = 0.0;
    p.noise_floor = 0.0;
    p.force_sd = 0.0;
    p.tilt_jitter = 0.0;
  }
  Rng rng(derive_seed(subject_seed, 1 + static_cast<std::uint64_t>(task)));

  const double dt = 1.0 / sample_rate;
  const auto n = static_cast<std::size_t>(std::floor(duration * sample_rate + 1e-9)) + 1;
  constexpr double kLead = 0.6;
  constexpr double kMinGap = 0.12;
  constexpr double kMinStroke = 0.12;
  constexpr double kMaxGap = 1.9;

  // Alternating stroke / gap schedule; some gaps become pauses.
  std::vector<Segment> strokes;
  std::vector<Segment> pauses;
  double cursor = kLead;
  while (true) {
    const double d = std::max(kMinStroke, rng.normal(p.stroke_mean, p.stroke_sd));
    if (cursor + d > duration - kLead) break;
    strokes.push_back({cursor, cursor + d});
    cursor += d;
    double gap;
    if (rng.uniform() < p.pause_rate) {
      gap = std::max(2.3, p.pause_mean * std::exp(0.25 * rng.normal()));
      pauses.push_back({cursor, cursor + gap});
    } else {
      gap = std::clamp(lognormal(rng, p.gap_mean, p.gap_sd), kMinGap, kMaxGap);
    }
    cursor += gap;
  }

  PenRecording rec;
  rec.sample_rate = sample_rate;
  rec.task = task;
  rec.t.resize(n);
  rec.force.assign(n, 0.0);
  for (auto& c : rec.accel) c.assign(n, 0.0);
  for (auto& c : rec.gyro) c.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) rec.t[k] = static_cast<double>(k) * dt;

  // Per-sample writing envelope: 1 on the sheet, 0.3 in the air between
  // strokes, 0 while resting in a pause or before/after writing.
  std::vector<double> envelope(n, 0.0);
  const double first = strokes.empty() ? duration : strokes.front().begin;
  const double last = strokes.empty() ? 0.0 : strokes.back().end;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = rec.t[k];
    if (t >= first && t < last) envelope[k] = 0.3;
  }
  for (const auto& ps : pauses) {
    for (std::size_t k = 0; k < n; ++k) {
      if (rec.t[k] >= ps.begin && rec.t[k] < ps.end) envelope[k] = 0.0;
    }
  }

  const auto force_noise = slow_wander(rng, n, dt, 0.08, 1.0);
  for (const auto& s : strokes) {
    const double level = std::max(0.4, rng.normal(p.force_level, p.force_sd));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const auto k0 = static_cast<std::size_t>(std::ceil(s.begin * sample_rate - 1e-9));
    for (std::size_t k = k0; k < n && rec.t[k] < s.end; ++k) {
      const double u = (rec.t[k] - s.begin) / (s.end - s.begin);
      const double shape = std::pow(std::sin(std::numbers::pi * u), 0.4);
      const double wiggle =
          1.0 + 0.18 * std::sin(2.0 * std::numbers::pi * p.force_wiggle * (rec.t[k] - s.begin) +
                                phase);
      const double jitter = options.noiseless ? 1.0 : 1.0 + 0.03 * force_noise[k];
      rec.force[k] = std::max(0.0, level * shape * wiggle * jitter);
      envelope[k] = 1.0;
    }
  }

  // Orientation: slow tilt wander plus small writing oscillations.
  const auto tilt_wander = slow_wander(rng, n, dt, 1.5, p.tilt_jitter);
  const double move_phase_x = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double move_phase_y = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double azimuth0 = rng.uniform(10.0, 50.0);
  std::vector<Quat> q(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = rec.t[k];
    const double osc = std::sin(2.0 * std::numbers::pi * p.move_freq * t + move_phase_x);
    const double tilt = p.tilt_mean + tilt_wander[k] + 1.5 * envelope[k] * osc;
    const double azimuth = azimuth0 + 5.0 * std::sin(2.0 * std::numbers::pi * 0.1 * t) +
                           3.0 * envelope[k] *
                               std::sin(2.0 * std::numbers::pi * p.move_freq * t + move_phase_y);
    q[k] = attitude(tilt * kDeg, azimuth * kDeg);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t a = k == 0 ? 0 : k - 1;
    const std::size_t b = k + 1 < n ? k + 1 : n - 1;
    const auto w = body_rate(q[a], q[b], static_cast<double>(b - a) * dt);
    for (int c = 0; c < 3; ++c) rec.gyro[c][k] = w[c] / kDeg;
  }

  // Tremor: a tone blended with pink noise, mostly along the vertical.
  const auto pink = pink_noise(rng, n);
  const auto freq_wander = slow_wander(rng, n, dt, 2.0, 0.15 * (1.0 - p.tremor_regularity));
  const double r = p.tremor_regularity;
  double tremor_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> tremor(n);
  for (std::size_t k = 0; k < n; ++k) {
    tremor[k] = p.tremor_amp * (r * std::numbers::sqrt2 * std::sin(tremor_phase) + (1.0 - r) * pink[k]);
    tremor_phase += 2.0 * std::numbers::pi * p.tremor_freq * (1.0 + freq_wander[k]) * dt;
  }

  for (std::size_t k = 0; k < n; ++k) {
    const double t = rec.t[k];
    const double env = envelope[k];
    const double w = 2.0 * std::numbers::pi * p.move_freq;
    const std::array<double, 3> world{
        env * p.move_amp * std::sin(w * t + move_phase_x) + 0.3 * tremor[k],
        env * 0.7 * p.move_amp * std::cos(1.3 * w * t + move_phase_y) + 0.3 * tremor[k],
        kGravity + env * 0.25 * p.move_amp * std::sin(2.0 * w * t + move_phase_y) + tremor[k]};
    const auto body = rotate(conj(q[k]), world);
    for (int c = 0; c < 3; ++c) {
      rec.accel[c][k] = body[c] + (p.noise_floor > 0.0 ? p.noise_floor * rng.normal() : 0.0);
      if (p.noise_floor > 0.0) rec.gyro[c][k] += 15.0 * p.noise_floor * rng.normal();
    }
  }

  return {std::move(rec), strokes.size()};
}

std::string subject_id_for(AgeGroup g, std::size_t index) {
  std::ostringstream os;
  os << to_string(g) << std::setw(2) << std::setfill('0') << index + 1;
  return os.str();
}

std::vector<SubjectSpec> cohort_plan(const CohortConfig& cfg) {
  std::vector<SubjectSpec> out;
  for (std::size_t g = 0; g < kAllGroups.size(); ++g) {
    for (std::size_t s = 0; s < cfg.subjects_per_group; ++s) {
      for (WritingTask task : {WritingTask::Text, WritingTask::List}) {
        out.push_back({subject_id_for(kAllGroups[g], s), kAllGroups[g], task,
                       derive_seed(cfg.seed, g, s)});
      }
    }
  }
  return out;
}

PenRecording generate_for(const SubjectSpec& spec, const CohortConfig& cfg) {
  const double duration =
      spec.task == WritingTask::Text ? cfg.text_duration : cfg.list_duration;
  auto gen = generate_subject(cfg.effective(spec.group), spec.task, duration, cfg.sample_rate,
                              spec.seed);
  gen.recording.subject_id = spec.subject_id;
  gen.recording.age_group = spec.group;
  return std::move(gen.recording);
}

std::string recording_file_name(const SubjectSpec& spec) {
  return spec.subject_id + "_" + std::string(to_string(spec.task)) + ".csv";
}

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries) {
  out << "subject_id,group,task,seed,file,sha256\n";
  for (const auto& e : entries) {
    out << e.spec.subject_id << ',' << to_string(e.spec.group) << ',' << to_string(e.spec.task)
        << ',' << e.spec.seed << ',' << e.file << ',' << e.sha256 << '\n';
  }
}

std::vector<ManifestEntry> read_manifest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedInput, "empty manifest");
  std::vector<ManifestEntry> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_fields(line, ',');
    if (f.size() != 6) throw Error(ErrorCode::MalformedInput, "manifest row: " + line);
    ManifestEntry e;
    e.spec.subject_id = std::string(f[0]);
    e.spec.group = parse_group(f[1]);
    e.spec.task = parse_task(f[2]);
    const auto [ptr, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), e.spec.seed);
    if (ec != std::errc() || ptr != f[3].data() + f[3].size()) {
      throw Error(ErrorCode::MalformedInput, "manifest seed: " + std::string(f[3]));
    }
    e.file = std::string(f[4]);
    e.sha256 = std::string(f[5]);
    out.push_back(std::move(e));
  }
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "SHA-256 failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

}  // namespace pentrace
