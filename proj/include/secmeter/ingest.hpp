#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace secmeter {

struct MalformedRowError : std::runtime_error {
  std::size_t line;
  MalformedRowError(std::size_t line_, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_) + ": " + what), line(line_) {}
};
struct GapDetectedError : std::runtime_error {
  explicit GapDetectedError(const std::string& what) : std::runtime_error(what) {}
};
struct NonMonotonicTimestampsError : std::runtime_error {
  explicit NonMonotonicTimestampsError(const std::string& what) : std::runtime_error(what) {}
};
struct InvalidAlphaError : std::runtime_error {
  InvalidAlphaError() : std::runtime_error("scale attack requires alpha in (0, 1)") {}
};
struct DataFileError : std::runtime_error {
  explicit DataFileError(const std::string& what) : std::runtime_error(what) {}
};

// UTC epoch seconds, half-hour aligned.
using Timestamp = std::int64_t;
constexpr int kIntervalSeconds = 1800;
constexpr int kIntervalsPerDay = 48;

std::string format_timestamp(Timestamp t);
// Strict ISO-8601 "YYYY-MM-DDTHH:MM:SSZ"; throws DataFileError on anything else.
Timestamp parse_timestamp(const std::string& s);

enum class Label { Normal, Malicious };

struct AttackSpec {
  enum class Kind { Scale, ZeroInterval, NightShift };
  Kind kind = Kind::Scale;
  double alpha = 0.0;     // Scale: multiplier in (0, 1)
  int start = 0;          // ZeroInterval: first within-day interval index
  int len = 0;            // ZeroInterval: zeroed intervals per day
  double fraction = 0.0;  // NightShift: share of daytime load moved to intervals 0..13
  // Applied interval range [begin, end) over the series; end == 0 means whole series.
  std::size_t range_begin = 0;
  std::size_t range_end = 0;
};

const char* attack_kind_name(AttackSpec::Kind k);
AttackSpec::Kind attack_kind_from_name(const std::string& name);

struct MeterSeries {
  std::string meter_id;
  Timestamp start = 0;
  std::vector<double> readings;  // kWh per 30-minute interval
  Label label = Label::Normal;
  std::optional<AttackSpec> attack;
};

// Schema: header "meter_id,timestamp,kwh", rows grouped per meter in file
// order, timestamps strictly increasing by exactly 30 minutes.
std::vector<MeterSeries> load_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<MeterSeries>& series);
std::string corpus_to_csv(const std::vector<MeterSeries>& series);

Timestamp default_corpus_start();

// Per-meter base load + morning/evening peaks + weekly modulation +
// lognormal noise; readings quantized to 3 decimals, never negative.
// Deterministic per (n_meters, days, seed) with per-meter derived seeds.
std::vector<MeterSeries> synthesize(int n_meters, int days, std::uint64_t seed,
                                    Timestamp start = default_corpus_start());

MeterSeries inject_fraud(const MeterSeries& s, const AttackSpec& spec);

struct RosterEntry {
  std::string meter_id;
  AttackSpec attack;
};

struct CorpusManifest {
  int n_meters = 0;
  int days = 0;
  double fraud_fraction = 0.0;
  std::uint64_t seed = 0;
  Timestamp start = 0;
  std::vector<RosterEntry> roster;
};

std::string manifest_to_json(const CorpusManifest& m);
CorpusManifest manifest_from_json(const std::string& text);

struct Corpus {
  std::vector<MeterSeries> series;
  CorpusManifest manifest;
};

// ceil(fraud_fraction * n_meters) malicious meters, attack kinds sampled
// uniformly from the taxonomy.
Corpus generate_corpus(int n_meters, int days, double fraud_fraction, std::uint64_t seed,
                       Timestamp start = default_corpus_start());
// Replay: same synthesis plus the manifest's recorded roster.
std::vector<MeterSeries> corpus_from_manifest(const CorpusManifest& m);
// Marks labels/attacks on a loaded (already attacked) corpus from the roster.
void apply_roster_labels(std::vector<MeterSeries>& series, const CorpusManifest& m);

}  // namespace secmeter
