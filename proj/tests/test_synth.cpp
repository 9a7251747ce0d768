#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pentrace/error.hpp"
#include "pentrace/gesture.hpp"
#include "pentrace/synth.hpp"

using namespace pentrace;

namespace {

std::string csv_of(const PenRecording& rec) {
  std::ostringstream out;
  write_recording_csv(out, rec);
  return out.str();
}

double in_air_of(const PenRecording& rec) {
  return temporal_indicators(segment_strokes(rec)).in_air;
}

double mean_force_of(const PenRecording& rec) {
  const auto seg = segment_strokes(rec);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : seg.strokes) {
    for (std::size_t k = s.begin; k < s.end; ++k, ++n) sum += rec.force[k];
  }
  return sum / static_cast<double>(n);
}

// AUC of the in-air indicator separating YY from EE writers.
double in_air_auc(const CohortConfig& cfg) {
  std::vector<double> s;
  std::vector<int> y;
  for (const auto& spec : cohort_plan(cfg)) {
    if (spec.task != WritingTask::Text) continue;
    if (spec.group != AgeGroup::YY && spec.group != AgeGroup::EE) continue;
    s.push_back(in_air_of(generate_for(spec, cfg)));
    y.push_back(spec.group == AgeGroup::EE ? 1 : 0);
  }
  return oracle::auc(s, y);
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  const auto p = CohortConfig::defaults().groups[1];
  const auto a = generate_subject(p, WritingTask::Text, 20.0, 50.0, 77);
  const auto b = generate_subject(p, WritingTask::Text, 20.0, 50.0, 77);
  const auto c = generate_subject(p, WritingTask::Text, 20.0, 50.0, 78);
  CHECK(csv_of(a.recording) == csv_of(b.recording));
  CHECK(csv_of(a.recording) != csv_of(c.recording));
  CHECK(a.recording.t.size() == 1001);
  CHECK_NOTHROW(validate(a.recording));
}

TEST_CASE("noiseless recordings segment into the scheduled strokes") {
  const auto cfg = CohortConfig::defaults();
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    for (const auto& p : cfg.groups) {
      const auto g = generate_subject(p, WritingTask::List, 25.0, 50.0, seed, {true});
      CHECK(segment_strokes(g.recording).strokes.size() == g.scheduled_strokes);
    }
  }
}

TEST_CASE("older archetypes pause longer and press more variably") {
  const auto cfg = CohortConfig::defaults();
  double yy_air = 0.0, ee_air = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    yy_air += in_air_of(generate_subject(cfg.groups[0], WritingTask::Text, 40.0, 50.0, seed).recording);
    ee_air += in_air_of(generate_subject(cfg.groups[3], WritingTask::Text, 40.0, 50.0, seed).recording);
  }
  CHECK(ee_air > yy_air);

  GroupParams light = cfg.groups[0], heavy = cfg.groups[0];
  light.force_level = 1.0;
  heavy.force_level = 2.5;
  const auto lo = generate_subject(light, WritingTask::Text, 30.0, 50.0, 5, {true});
  const auto hi = generate_subject(heavy, WritingTask::Text, 30.0, 50.0, 5, {true});
  CHECK(mean_force_of(hi.recording) > mean_force_of(lo.recording));
}

TEST_CASE("a subject's two tasks share personal traits but not signals") {
  GroupParams p = CohortConfig::defaults().groups[2];
  p.subject_spread = 0.6;
  const auto text = generate_subject(p, WritingTask::Text, 30.0, 50.0, 11);
  const auto list = generate_subject(p, WritingTask::List, 30.0, 50.0, 11);
  CHECK(csv_of(text.recording) != csv_of(list.recording));
  CHECK(text.recording.task == WritingTask::Text);
  CHECK(list.recording.task == WritingTask::List);
}

TEST_CASE("the cohort plan covers every subject and task once") {
  const auto cfg = CohortConfig::defaults();
  const auto plan = cohort_plan(cfg);
  CHECK(plan.size() == 160);
  std::set<std::pair<std::string, WritingTask>> seen;
  for (const auto& s : plan) seen.insert({s.subject_id, s.task});
  CHECK(seen.size() == 160);
  CHECK(plan.front().subject_id == "YY01");
  CHECK(subject_id_for(AgeGroup::EF, 3) == "EF04");
  CHECK(subject_id_for(AgeGroup::EE, 19) == "EE20");
  for (std::size_t i = 0; i + 1 < plan.size(); i += 2) {
    CHECK(plan[i].subject_id == plan[i + 1].subject_id);
    CHECK(plan[i].seed == plan[i + 1].seed);
  }
  auto other = cfg;
  other.seed = 43;
  CHECK(cohort_plan(other).front().seed != plan.front().seed);
}

TEST_CASE("every planned recording validates") {
  auto cfg = CohortConfig::defaults();
  cfg.subjects_per_group = 3;
  for (const auto& spec : cohort_plan(cfg)) {
    const auto rec = generate_for(spec, cfg);
    CHECK_NOTHROW(validate(rec));
    CHECK(rec.subject_id == spec.subject_id);
    CHECK(rec.age_group == spec.group);
  }
}

TEST_CASE("manifests round-trip and hashes match the files") {
  const auto dir = fixture::scratch("synth_manifest");
  auto cfg = CohortConfig::defaults();
  cfg.subjects_per_group = 1;
  std::vector<ManifestEntry> entries;
  for (const auto& spec : cohort_plan(cfg)) {
    const auto file = recording_file_name(spec);
    const auto text = csv_of(generate_for(spec, cfg));
    std::ofstream(dir / file) << text;
    entries.push_back({spec, file, sha256_hex(text)});
  }
  std::stringstream buf;
  write_manifest(buf, entries);
  const auto back = read_manifest(buf);
  REQUIRE(back.size() == entries.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].spec.subject_id == entries[i].spec.subject_id);
    CHECK(back[i].spec.group == entries[i].spec.group);
    CHECK(back[i].spec.task == entries[i].spec.task);
    CHECK(back[i].spec.seed == entries[i].spec.seed);
    CHECK(back[i].sha256 == sha256_file(dir / back[i].file));
  }
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("a larger gap scale separates the groups more") {
  auto cfg = CohortConfig::defaults();
  cfg.subjects_per_group = 12;
  cfg.text_duration = 30.0;
  cfg.gap_scale = 0.1;
  const double weak = in_air_auc(cfg);
  cfg.gap_scale = 1.0;
  const double strong = in_air_auc(cfg);
  CHECK(strong > weak);
  CHECK(strong >= 90.0);
}

TEST_CASE("bad generation arguments are rejected") {
  const auto p = CohortConfig::defaults().groups[0];
  CHECK_THROWS_AS(generate_subject(p, WritingTask::Text, 0.0, 50.0, 1), Error);
  CHECK_THROWS_AS(generate_subject(p, WritingTask::Text, 10.0, -1.0, 1), Error);
}
