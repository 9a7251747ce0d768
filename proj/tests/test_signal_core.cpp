#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "pentrace/error.hpp"
#include "pentrace/numfmt.hpp"
#include "pentrace/recording.hpp"

using namespace pentrace;

namespace {

std::string csv_rows(std::size_t n, double dt, std::size_t backwards_at = 0) {
  std::ostringstream out;
  out << "t,ax,ay,az,gx,gy,gz,f\n";
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) * dt;
    if (backwards_at && i == backwards_at) t -= 3 * dt;
    out << format_double(t) << ",0,0,9.81,0,0,0," << (i % 7 == 0 ? "0.5" : "0") << '\n';
  }
  return out.str();
}

ErrorCode load_error(const std::string& text, RecordingFormat fmt = RecordingFormat::Csv) {
  std::istringstream in(text);
  try {
    load_recording(in, fmt);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

std::size_t total_length(const std::vector<Interval>& ivs) {
  std::size_t s = 0;
  for (const auto& iv : ivs) s += iv.length();
  return s;
}

}  // namespace

TEST_CASE("csv with 500 rows at 20 ms loads as 9.98 s") {
  std::istringstream in(csv_rows(500, 0.02));
  const auto rec = load_recording(in, RecordingFormat::Csv);
  CHECK(rec.size() == 500);
  CHECK(rec.duration() == doctest::Approx(9.98).epsilon(1e-12));
  CHECK(rec.sample_rate == doctest::Approx(50.0));
  CHECK(rec.t.front() == 0.0);
}

TEST_CASE("timestamps are rebased to zero") {
  std::ostringstream out;
  out << "t,ax,ay,az,gx,gy,gz,f\n";
  for (int i = 0; i < 300; ++i) out << 100.0 + i * 0.02 << ",0,0,9.81,0,0,0,0\n";
  std::istringstream in(out.str());
  const auto rec = load_recording(in, RecordingFormat::Csv);
  CHECK(rec.t.front() == 0.0);
  CHECK(rec.t.back() == doctest::Approx(299 * 0.02));
}

TEST_CASE("loader rejects malformed recordings") {
  CHECK(load_error(csv_rows(500, 0.02, 10)) == ErrorCode::NonMonotonicTime);
  CHECK(load_error(csv_rows(100, 0.02)) == ErrorCode::TooShort);

  std::string seven = "t,ax,ay,az,gx,gy,gz\n";
  for (int i = 0; i < 300; ++i) seven += std::to_string(i * 0.02) + ",0,0,9.81,0,0,0\n";
  CHECK(load_error(seven) == ErrorCode::MalformedInput);

  std::string short_row = csv_rows(300, 0.02) + "6.0,0,0,9.81,0,0,0\n";
  CHECK(load_error(short_row) == ErrorCode::MalformedInput);

  std::string bad_cell = csv_rows(300, 0.02) + "6.0,0,0,abc,0,0,0,0\n";
  CHECK(load_error(bad_cell) == ErrorCode::MalformedInput);

  std::string negative = csv_rows(300, 0.02) + "6.0,0,0,9.81,0,0,0,-0.1\n";
  CHECK(load_error(negative) == ErrorCode::NegativeForce);

  CHECK(load_error("{not json", RecordingFormat::Json) == ErrorCode::MalformedInput);
}

TEST_CASE("csv and json writers round-trip exactly") {
  auto rec = fixture::with_force(fixture::square_force(5, 0.7, 0.4, 50.0));
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  for (auto& ch : rec.accel)
    for (auto& v : ch) v += 0.1 * nd(gen);
  rec.age_group = AgeGroup::EF;
  rec.task = WritingTask::List;
  rec.subject_id = "EF07";

  std::stringstream csv;
  write_recording_csv(csv, rec);
  const auto from_csv = load_recording(csv, RecordingFormat::Csv);
  CHECK(from_csv.accel == rec.accel);
  CHECK(from_csv.force == rec.force);
  CHECK(from_csv.t == rec.t);

  std::stringstream js;
  write_recording_json(js, rec);
  const auto from_json = load_recording(js, RecordingFormat::Json);
  CHECK(from_json.accel == rec.accel);
  CHECK(from_json.gyro == rec.gyro);
  CHECK(from_json.subject_id == "EF07");
  CHECK(from_json.task == WritingTask::List);
  REQUIRE(from_json.age_group.has_value());
  CHECK(*from_json.age_group == AgeGroup::EF);
}

TEST_CASE("resampling a uniform 50 Hz recording is the identity") {
  auto rec = fixture::with_force(fixture::square_force(4, 1.0, 0.5, 50.0));
  rec.accel[0] = fixture::tone(3.0, rec.size());
  const auto out = resample_uniform(rec, 50.0);
  REQUIRE(out.size() == rec.size());
  for (std::size_t i = 0; i < rec.size(); ++i) {
    CHECK(std::abs(out.accel[0][i] - rec.accel[0][i]) <= 1e-12);
    CHECK(std::abs(out.t[i] - rec.t[i]) <= 1e-12);
  }
  const auto twice = resample_uniform(out, 50.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(std::abs(twice.accel[0][i] - out.accel[0][i]) <= 1e-12);
  }
}

TEST_CASE("linear interpolation reproduces a ramp exactly") {
  auto rec = fixture::still_pen(1000, 100.0);
  for (std::size_t i = 0; i < rec.size(); ++i) rec.accel[1][i] = rec.t[i];
  const auto out = resample_uniform(rec, 50.0);
  CHECK(out.size() == 500);
  for (std::size_t k = 0; k < out.size(); ++k) {
    CHECK(out.accel[1][k] == doctest::Approx(out.t[k]).epsilon(1e-12));
    CHECK(out.t[k] == doctest::Approx(static_cast<double>(k) / 50.0).epsilon(1e-12));
  }
}

TEST_CASE("jittered sine resamples within the linear interpolation bound") {
  const double f = 2.0;
  const double w = 2.0 * std::numbers::pi * f;
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> jitter(-0.004, 0.004);
  auto rec = fixture::still_pen(600);
  for (std::size_t i = 1; i + 1 < rec.size(); ++i) rec.t[i] += jitter(gen);
  double h = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    rec.accel[0][i] = std::sin(w * rec.t[i]);
    if (i) h = std::max(h, rec.t[i] - rec.t[i - 1]);
  }
  const auto out = resample_uniform(rec, 50.0);
  const double bound = w * w * h * h / 8.0;
  double worst = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    worst = std::max(worst, std::abs(out.accel[0][k] - std::sin(w * out.t[k])));
  }
  CHECK(worst <= bound);
  CHECK(std::abs(out.duration() - rec.duration()) <= 1.0 / 50.0);
}

TEST_CASE("single short stroke") {
  const std::vector<double> force = {0, 0, 1, 1, 1, 0, 0};
  SegmentationParams p;
  p.min_stroke = 0.02;
  const auto seg = segment_force(force, 50.0, p);
  REQUIRE(seg.strokes.size() == 1);
  CHECK(seg.strokes[0] == Interval{2, 5});
  CHECK(seg.seconds(seg.strokes[0]) == doctest::Approx(0.06));
  CHECK(seg.in_air.empty());
  CHECK(seg.pauses.empty());
}

TEST_CASE("square wave segments into strokes and in-air gaps") {
  const auto force = fixture::square_force(10, 1.0, 0.5, 50.0);
  const auto seg = segment_strokes(fixture::with_force(force));
  REQUIRE(seg.strokes.size() == 10);
  REQUIRE(seg.in_air.size() == 9);
  for (const auto& s : seg.strokes) CHECK(seg.seconds(s) == doctest::Approx(1.0));
  for (const auto& g : seg.in_air) CHECK(seg.seconds(g) == doctest::Approx(0.5));
  CHECK(seg.pauses.empty());
  CHECK(seg.boundary.size() == 2);
}

TEST_CASE("a gap longer than the cutoff becomes a pause") {
  std::vector<double> force(25, 0.0);
  for (int c = 0; c < 10; ++c) {
    force.insert(force.end(), 50, 1.0);
    if (c < 9) force.insert(force.end(), c == 4 ? 125 : 25, 0.0);
  }
  force.insert(force.end(), 25, 0.0);
  const auto seg = segment_strokes(fixture::with_force(force));
  REQUIRE(seg.strokes.size() == 10);
  REQUIRE(seg.pauses.size() == 1);
  CHECK(seg.seconds(seg.pauses[0]) == doctest::Approx(2.5));
  CHECK(seg.in_air.size() == 8);
}

TEST_CASE("no force means no writing") {
  const auto rec = fixture::still_pen(300);
  CHECK_THROWS_AS(segment_strokes(rec), Error);
  try {
    segment_strokes(rec);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyWriting);
  }
}

TEST_CASE("segmentation covers every sample exactly once") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> force(600);
    double level = 0.0;
    for (auto& f : force) {
      if (u(gen) < 0.08) level = u(gen) < 0.5 ? 0.0 : u(gen) * 2.0;
      f = std::max(0.0, level + 0.03 * (u(gen) - 0.5));
    }
    force[300] = 1.5;
    force[301] = 1.5;
    force[302] = 1.5;
    StrokeSegmentation seg;
    try {
      seg = segment_force(force, 50.0);
    } catch (const Error&) {
      continue;
    }
    std::vector<int> hits(force.size(), 0);
    std::vector<Interval> all;
    for (const auto* list : {&seg.strokes, &seg.in_air, &seg.pauses, &seg.boundary}) {
      all.insert(all.end(), list->begin(), list->end());
    }
    for (const auto& iv : all) {
      CHECK(iv.begin < iv.end);
      for (std::size_t i = iv.begin; i < iv.end; ++i) hits[i]++;
    }
    for (int h : hits) CHECK(h == 1);
    for (const auto& g : seg.in_air) CHECK(seg.seconds(g) <= seg.pause_cutoff);
    for (const auto& p : seg.pauses) CHECK(seg.seconds(p) > seg.pause_cutoff);
  }
}

TEST_CASE("raising the threshold never adds on-sheet time") {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> force(500);
    for (std::size_t i = 0; i < force.size(); ++i) {
      force[i] = std::max(0.0, std::sin(0.07 * static_cast<double>(i) + trial) + 0.2 * u(gen));
    }
    std::size_t previous = force.size() + 1;
    for (double thr : {0.05, 0.1, 0.2, 0.4, 0.6, 0.8}) {
      SegmentationParams p;
      p.force_threshold = thr;
      std::size_t on = 0;
      try {
        on = total_length(segment_force(force, 50.0, p).strokes);
      } catch (const Error&) {
        on = 0;
      }
      CHECK(on <= previous);
      previous = on;
    }
  }
}
