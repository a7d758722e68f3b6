#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "secmeter/ingest.hpp"

using namespace secmeter;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  std::ofstream out(name, std::ios::binary);
  out << content;
  return name;
}

double mean_daily_kwh(const MeterSeries& s) {
  double total = std::accumulate(s.readings.begin(), s.readings.end(), 0.0);
  return total / ((double)s.readings.size() / kIntervalsPerDay);
}

// Best single-threshold classifier on mean daily consumption.
double threshold_rule_accuracy(const std::vector<MeterSeries>& series) {
  std::vector<std::pair<double, bool>> pts;
  for (const auto& s : series) pts.push_back({mean_daily_kwh(s), s.label == Label::Malicious});
  std::sort(pts.begin(), pts.end());
  std::size_t best = 0;
  for (std::size_t cut = 0; cut <= pts.size(); ++cut) {
    // predict malicious below the cut
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if ((i < cut) == pts[i].second) ++correct;
    best = std::max(best, correct);
  }
  return (double)best / (double)pts.size();
}

}  // namespace

TEST_CASE("timestamp format round trip") {
  Timestamp t = parse_timestamp("2026-01-01T00:00:00Z");
  CHECK(format_timestamp(t) == "2026-01-01T00:00:00Z");
  CHECK(parse_timestamp("2026-01-01T00:30:00Z") == t + 1800);
  CHECK_THROWS_AS(parse_timestamp("2026-01-01 00:30:00Z"), DataFileError);
  CHECK_THROWS_AS(parse_timestamp("2026-13-01T00:30:00Z"), DataFileError);
}

TEST_CASE("load_csv basics") {
  auto p = write_temp("ingest_empty.csv", "meter_id,timestamp,kwh\n");
  CHECK(load_csv(p).empty());
  std::remove(p.c_str());

  std::string body = "meter_id,timestamp,kwh\n";
  for (int m = 0; m < 2; ++m)
    for (int i = 0; i < 48; ++i) {
      body += "M" + std::to_string(m) + "," +
              format_timestamp(default_corpus_start() + (Timestamp)i * 1800) + ",1.000\n";
    }
  p = write_temp("ingest_two.csv", body);
  auto series = load_csv(p);
  REQUIRE(series.size() == 2);
  CHECK(series[0].readings.size() == 48);
  CHECK(series[1].readings.size() == 48);
  CHECK(series[0].meter_id == "M0");
  std::remove(p.c_str());
}

TEST_CASE("load_csv error paths") {
  auto start = default_corpus_start();
  std::string head = "meter_id,timestamp,kwh\n";

  auto p = write_temp("ingest_gap.csv",
                      head + "A," + format_timestamp(start) + ",1.0\n" +
                          "A," + format_timestamp(start + 3600) + ",1.0\n");
  CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains(format_timestamp(start + 1800).c_str()),
                       GapDetectedError);
  std::remove(p.c_str());

  p = write_temp("ingest_mono.csv",
                 head + "A," + format_timestamp(start + 1800) + ",1.0\n" +
                     "A," + format_timestamp(start) + ",1.0\n");
  CHECK_THROWS_AS(load_csv(p), NonMonotonicTimestampsError);
  std::remove(p.c_str());

  p = write_temp("ingest_row.csv", head + "A," + format_timestamp(start) + "\n");
  try {
    load_csv(p);
    FAIL("expected MalformedRowError");
  } catch (const MalformedRowError& e) {
    CHECK(e.line == 2);
  }
  std::remove(p.c_str());

  p = write_temp("ingest_neg.csv", head + "A," + format_timestamp(start) + ",-1.0\n");
  CHECK_THROWS_AS(load_csv(p), MalformedRowError);
  std::remove(p.c_str());

  p = write_temp("ingest_align.csv", head + "A,2026-01-01T00:10:00Z,1.0\n");
  CHECK_THROWS_AS(load_csv(p), MalformedRowError);
  std::remove(p.c_str());
}

TEST_CASE("synthesize shapes and determinism") {
  CHECK(synthesize(0, 7, 4).empty());
  auto corpus = synthesize(5, 31, 42);
  REQUIRE(corpus.size() == 5);
  for (const auto& s : corpus) {
    CHECK(s.readings.size() == 1488);
    for (double r : s.readings) CHECK(r >= 0.0);
  }
  auto corpus2 = synthesize(5, 31, 42);
  for (std::size_t i = 0; i < corpus.size(); ++i)
    CHECK(corpus[i].readings == corpus2[i].readings);
  auto corpus3 = synthesize(5, 31, 43);
  CHECK(corpus[0].readings != corpus3[0].readings);
}

TEST_CASE("csv round trip is byte identical for normalized files") {
  auto corpus = synthesize(3, 2, 7);
  write_csv("ingest_rt.csv", corpus);
  auto loaded = load_csv("ingest_rt.csv");
  write_csv("ingest_rt2.csv", loaded);
  std::ifstream f1("ingest_rt.csv", std::ios::binary), f2("ingest_rt2.csv", std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(!s1.empty());
  std::remove("ingest_rt.csv");
  std::remove("ingest_rt2.csv");
}

TEST_CASE("scale attack") {
  auto s = synthesize(1, 2, 9)[0];
  AttackSpec bad;
  bad.kind = AttackSpec::Kind::Scale;
  bad.alpha = 1.0;
  CHECK_THROWS_AS(inject_fraud(s, bad), InvalidAlphaError);
  bad.alpha = 0.0;
  CHECK_THROWS_AS(inject_fraud(s, bad), InvalidAlphaError);

  AttackSpec half;
  half.kind = AttackSpec::Kind::Scale;
  half.alpha = 0.5;
  auto attacked = inject_fraud(s, half);
  CHECK(attacked.label == Label::Malicious);
  CHECK(attacked.attack.has_value());
  for (std::size_t i = 0; i < s.readings.size(); ++i) {
    CHECK(attacked.readings[i] == doctest::Approx(s.readings[i] * 0.5));
    CHECK(attacked.readings[i] >= 0.0);
  }
}

TEST_CASE("zero interval attack recurs daily") {
  auto s = synthesize(1, 3, 11)[0];
  AttackSpec z;
  z.kind = AttackSpec::Kind::ZeroInterval;
  z.start = 10;
  z.len = 4;
  auto attacked = inject_fraud(s, z);
  for (std::size_t i = 0; i < attacked.readings.size(); ++i) {
    int within = (int)(i % kIntervalsPerDay);
    if (within >= 10 && within < 14)
      CHECK(attacked.readings[i] == 0.0);
    else
      CHECK(attacked.readings[i] == s.readings[i]);
  }
  z.start = 45;
  z.len = 10;
  CHECK_THROWS_AS(inject_fraud(s, z), DataFileError);
}

TEST_CASE("night shift preserves daily totals and raises the off-peak share") {
  auto s = synthesize(1, 4, 13)[0];
  AttackSpec n;
  n.kind = AttackSpec::Kind::NightShift;
  n.fraction = 0.3;
  auto attacked = inject_fraud(s, n);
  for (int d = 0; d < 4; ++d) {
    double before = 0, after = 0, off_before = 0, off_after = 0;
    for (int i = 0; i < kIntervalsPerDay; ++i) {
      std::size_t idx = (size_t)(d * kIntervalsPerDay + i);
      before += s.readings[idx];
      after += attacked.readings[idx];
      if (i < 14) {
        off_before += s.readings[idx];
        off_after += attacked.readings[idx];
      }
    }
    CHECK(after == doctest::Approx(before).epsilon(1e-9));
    CHECK(off_after > off_before);
  }
  for (double r : attacked.readings) CHECK(r >= 0.0);
}

TEST_CASE("scaling-fraud corpora separate on mean daily consumption") {
  auto corpus = synthesize(100, 14, 2026);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> alpha_dist(0.2, 0.6);
  for (std::size_t i = 0; i < 30; ++i) {
    AttackSpec a;
    a.kind = AttackSpec::Kind::Scale;
    a.alpha = alpha_dist(gen);
    std::size_t idx = gen() % corpus.size();
    corpus[idx] = inject_fraud(corpus[idx], a);
  }
  CHECK(threshold_rule_accuracy(corpus) >= 0.9);
}

TEST_CASE("generate_corpus labels ceil(fraction * n) meters and replays from manifest") {
  auto c = generate_corpus(10, 2, 0.5, 77);
  std::size_t malicious = 0;
  for (const auto& s : c.series)
    if (s.label == Label::Malicious) ++malicious;
  CHECK(malicious == 5);
  CHECK(c.manifest.roster.size() == 5);

  auto c0 = generate_corpus(10, 2, 0.0, 77);
  for (const auto& s : c0.series) CHECK(s.label == Label::Normal);

  auto c33 = generate_corpus(9, 1, 0.34, 1);
  std::size_t m33 = 0;
  for (const auto& s : c33.series)
    if (s.label == Label::Malicious) ++m33;
  CHECK(m33 == 4);  // ceil(0.34 * 9)

  // manifest replay reproduces the corpus byte-identically
  auto text = manifest_to_json(c.manifest);
  auto parsed = manifest_from_json(text);
  auto replayed = corpus_from_manifest(parsed);
  CHECK(corpus_to_csv(replayed) == corpus_to_csv(c.series));

  // labels derived from the roster match the originals
  auto relabeled = replayed;
  for (auto& s : relabeled) {
    s.label = Label::Normal;
    s.attack.reset();
  }
  apply_roster_labels(relabeled, parsed);
  for (std::size_t i = 0; i < relabeled.size(); ++i)
    CHECK((relabeled[i].label == Label::Malicious) == (c.series[i].label == Label::Malicious));
}
