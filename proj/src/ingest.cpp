#include "secmeter/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

namespace secmeter {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt + 0x9E3779B97F4A7C15ull + (seed << 6) + (seed >> 2));
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDull;
  x ^= x >> 33;
  x *= 0xC4CEB9FE1A85EC53ull;
  x ^= x >> 33;
  return x;
}

double quantize3(double x) { return std::round(x * 1000.0) / 1000.0; }

std::string format_kwh(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", x);
  return buf;
}

}  // namespace

std::string format_timestamp(Timestamp t) {
  std::time_t tt = (std::time_t)t;
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

Timestamp parse_timestamp(const std::string& s) {
  int y, mo, d, h, mi, sec;
  char z;
  if (s.size() != 20 ||
      std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &sec, &z) != 7 ||
      z != 'Z')
    throw DataFileError("bad timestamp: " + s);
  std::tm tm{};
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = sec;
  std::time_t tt = timegm(&tm);
  if (tt == (std::time_t)-1) throw DataFileError("bad timestamp: " + s);
  Timestamp out = (Timestamp)tt;
  if (format_timestamp(out) != s) throw DataFileError("bad timestamp: " + s);
  return out;
}

const char* attack_kind_name(AttackSpec::Kind k) {
  switch (k) {
    case AttackSpec::Kind::Scale: return "scale";
    case AttackSpec::Kind::ZeroInterval: return "zero_interval";
    case AttackSpec::Kind::NightShift: return "night_shift";
  }
  return "?";
}

AttackSpec::Kind attack_kind_from_name(const std::string& name) {
  if (name == "scale") return AttackSpec::Kind::Scale;
  if (name == "zero_interval") return AttackSpec::Kind::ZeroInterval;
  if (name == "night_shift") return AttackSpec::Kind::NightShift;
  throw DataFileError("unknown attack kind: " + name);
}

std::vector<MeterSeries> load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataFileError("cannot open corpus file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataFileError("empty corpus file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "meter_id,timestamp,kwh")
    throw MalformedRowError(1, "expected header meter_id,timestamp,kwh");

  std::vector<MeterSeries> out;
  std::map<std::string, std::size_t> index;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t c1 = line.find(',');
    std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw MalformedRowError(lineno, "expected meter_id,timestamp,kwh");
    std::string id = line.substr(0, c1);
    std::string ts_str = line.substr(c1 + 1, c2 - c1 - 1);
    std::string kwh_str = line.substr(c2 + 1);
    if (id.empty()) throw MalformedRowError(lineno, "empty meter id");

    Timestamp ts;
    try {
      ts = parse_timestamp(ts_str);
    } catch (const DataFileError& e) {
      throw MalformedRowError(lineno, e.what());
    }
    if (ts % kIntervalSeconds != 0)
      throw MalformedRowError(lineno, "timestamp not half-hour aligned: " + ts_str);

    double kwh;
    try {
      std::size_t used = 0;
      kwh = std::stod(kwh_str, &used);
      if (used != kwh_str.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw MalformedRowError(lineno, "bad kwh value: " + kwh_str);
    }
    if (!std::isfinite(kwh) || kwh < 0.0)
      throw MalformedRowError(lineno, "kwh must be finite and non-negative");

    auto it = index.find(id);
    if (it == index.end()) {
      index.emplace(id, out.size());
      out.push_back({id, ts, {kwh}, Label::Normal, std::nullopt});
      continue;
    }
    MeterSeries& s = out[it->second];
    Timestamp expected = s.start + (Timestamp)s.readings.size() * kIntervalSeconds;
    if (ts < expected)
      throw NonMonotonicTimestampsError("meter " + id + " at " + format_timestamp(ts));
    if (ts > expected)
      throw GapDetectedError("meter " + id + " missing interval at " + format_timestamp(expected));
    s.readings.push_back(kwh);
  }
  return out;
}

std::string corpus_to_csv(const std::vector<MeterSeries>& series) {
  std::ostringstream out;
  out << "meter_id,timestamp,kwh\n";
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.readings.size(); ++i) {
      out << s.meter_id << ',' << format_timestamp(s.start + (Timestamp)i * kIntervalSeconds)
          << ',' << format_kwh(s.readings[i]) << '\n';
    }
  }
  return out.str();
}

void write_csv(const std::string& path, const std::vector<MeterSeries>& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataFileError("cannot open corpus file for writing: " + path);
  out << corpus_to_csv(series);
}

Timestamp default_corpus_start() {
  static const Timestamp t = parse_timestamp("2026-01-01T00:00:00Z");
  return t;
}

std::vector<MeterSeries> synthesize(int n_meters, int days, std::uint64_t seed, Timestamp start) {
  std::vector<MeterSeries> out;
  out.reserve((size_t)std::max(0, n_meters));
  for (int m = 0; m < n_meters; ++m) {
    std::mt19937_64 gen(mix_seed(seed, (std::uint64_t)m));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double base = 0.25 + 0.15 * u01(gen);           // kWh per interval
    const double morning_amp = 0.5 + 0.5 * u01(gen);      // peak heights
    const double evening_amp = 0.8 + 0.7 * u01(gen);
    const double morning_center = 15.0 + 2.0 * u01(gen);  // ~07:30-08:30
    const double evening_center = 38.0 + 3.0 * u01(gen);  // ~19:00-20:30
    const double weekend_boost = 1.05 + 0.15 * u01(gen);
    std::normal_distribution<double> noise(0.0, 0.12);

    MeterSeries s;
    char id[16];
    std::snprintf(id, sizeof(id), "M%04d", m);
    s.meter_id = id;
    s.start = start;
    s.readings.resize((size_t)days * kIntervalsPerDay);
    for (int d = 0; d < days; ++d) {
      // day-of-week from the start timestamp; 1970-01-01 was a Thursday
      long day_index = (long)((start / 86400) + d);
      int dow = (int)(((day_index % 7) + 7 + 4) % 7);  // 0 = Sunday
      double wk = (dow == 0 || dow == 6) ? weekend_boost : 1.0;
      for (int i = 0; i < kIntervalsPerDay; ++i) {
        double morning = morning_amp * std::exp(-0.5 * std::pow(((double)i - morning_center) / 2.0, 2));
        double evening = evening_amp * std::exp(-0.5 * std::pow(((double)i - evening_center) / 3.0, 2));
        double level = (base + morning + evening) * wk * std::exp(noise(gen));
        s.readings[(size_t)(d * kIntervalsPerDay + i)] = std::max(0.0, quantize3(level));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

MeterSeries inject_fraud(const MeterSeries& s, const AttackSpec& spec) {
  MeterSeries out = s;
  std::size_t begin = spec.range_begin;
  std::size_t end = spec.range_end == 0 ? s.readings.size() : spec.range_end;
  if (begin > end || end > s.readings.size())
    throw DataFileError("attack range exceeds series length");

  switch (spec.kind) {
    case AttackSpec::Kind::Scale: {
      if (!(spec.alpha > 0.0) || !(spec.alpha < 1.0)) throw InvalidAlphaError();
      for (std::size_t i = begin; i < end; ++i) out.readings[i] *= spec.alpha;
      break;
    }
    case AttackSpec::Kind::ZeroInterval: {
      if (spec.start < 0 || spec.len <= 0 || spec.start + spec.len > kIntervalsPerDay)
        throw DataFileError("zero_interval window must fit inside a day");
      for (std::size_t i = begin; i < end; ++i) {
        int within = (int)(i % kIntervalsPerDay);
        if (within >= spec.start && within < spec.start + spec.len) out.readings[i] = 0.0;
      }
      break;
    }
    case AttackSpec::Kind::NightShift: {
      if (!(spec.fraction > 0.0) || !(spec.fraction < 1.0))
        throw DataFileError("night_shift fraction must be in (0, 1)");
      // Move a fraction of the daytime load (intervals 14..47) into 0..13,
      // day by day, preserving each day's total.
      std::size_t first_day = begin / kIntervalsPerDay;
      std::size_t last_day = (end + kIntervalsPerDay - 1) / kIntervalsPerDay;
      for (std::size_t d = first_day; d < last_day; ++d) {
        std::size_t day_base = d * kIntervalsPerDay;
        if (day_base + kIntervalsPerDay > out.readings.size()) break;
        double daytime = 0.0;
        for (int i = 14; i < kIntervalsPerDay; ++i) daytime += out.readings[day_base + (size_t)i];
        double moved = spec.fraction * daytime;
        for (int i = 14; i < kIntervalsPerDay; ++i)
          out.readings[day_base + (size_t)i] *= (1.0 - spec.fraction);
        for (int i = 0; i < 14; ++i) out.readings[day_base + (size_t)i] += moved / 14.0;
      }
      break;
    }
  }
  out.label = Label::Malicious;
  out.attack = spec;
  return out;
}

namespace {

nlohmann::json attack_to_json(const AttackSpec& a) {
  nlohmann::json j;
  j["kind"] = attack_kind_name(a.kind);
  switch (a.kind) {
    case AttackSpec::Kind::Scale: j["alpha"] = a.alpha; break;
    case AttackSpec::Kind::ZeroInterval:
      j["start"] = a.start;
      j["len"] = a.len;
      break;
    case AttackSpec::Kind::NightShift: j["fraction"] = a.fraction; break;
  }
  j["range_begin"] = a.range_begin;
  j["range_end"] = a.range_end;
  return j;
}

AttackSpec attack_from_json(const nlohmann::json& j) {
  AttackSpec a;
  a.kind = attack_kind_from_name(j.at("kind").get<std::string>());
  switch (a.kind) {
    case AttackSpec::Kind::Scale: a.alpha = j.at("alpha").get<double>(); break;
    case AttackSpec::Kind::ZeroInterval:
      a.start = j.at("start").get<int>();
      a.len = j.at("len").get<int>();
      break;
    case AttackSpec::Kind::NightShift: a.fraction = j.at("fraction").get<double>(); break;
  }
  a.range_begin = j.value("range_begin", (std::size_t)0);
  a.range_end = j.value("range_end", (std::size_t)0);
  return a;
}

}  // namespace

std::string manifest_to_json(const CorpusManifest& m) {
  nlohmann::json j;
  j["n_meters"] = m.n_meters;
  j["days"] = m.days;
  j["fraud_fraction"] = m.fraud_fraction;
  j["seed"] = m.seed;
  j["start"] = format_timestamp(m.start);
  j["roster"] = nlohmann::json::array();
  for (const auto& r : m.roster) {
    nlohmann::json e;
    e["meter_id"] = r.meter_id;
    e["attack"] = attack_to_json(r.attack);
    j["roster"].push_back(e);
  }
  return j.dump(2) + "\n";
}

CorpusManifest manifest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataFileError(std::string("bad manifest JSON: ") + e.what());
  }
  try {
    CorpusManifest m;
    m.n_meters = j.at("n_meters").get<int>();
    m.days = j.at("days").get<int>();
    m.fraud_fraction = j.value("fraud_fraction", 0.0);
    m.seed = j.at("seed").get<std::uint64_t>();
    m.start = parse_timestamp(j.at("start").get<std::string>());
    for (const auto& e : j.value("roster", nlohmann::json::array()))
      m.roster.push_back({e.at("meter_id").get<std::string>(), attack_from_json(e.at("attack"))});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataFileError(std::string("bad manifest JSON: ") + e.what());
  }
}

Corpus generate_corpus(int n_meters, int days, double fraud_fraction, std::uint64_t seed,
                       Timestamp start) {
  if (n_meters < 0 || days <= 0 || fraud_fraction < 0.0 || fraud_fraction > 1.0)
    throw DataFileError("bad corpus parameters");
  Corpus c;
  c.series = synthesize(n_meters, days, seed, start);
  c.manifest = {n_meters, days, fraud_fraction, seed, start, {}};

  int n_fraud = (int)std::ceil(fraud_fraction * (double)n_meters);
  if (n_fraud == 0) return c;

  std::mt19937_64 gen(mix_seed(seed, 0xf4a0d));
  std::vector<int> order((size_t)n_meters);
  for (int i = 0; i < n_meters; ++i) order[(size_t)i] = i;
  std::shuffle(order.begin(), order.end(), gen);
  order.resize((size_t)n_fraud);
  std::sort(order.begin(), order.end());

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int idx : order) {
    AttackSpec a;
    switch (gen() % 3) {
      case 0:
        a.kind = AttackSpec::Kind::Scale;
        a.alpha = 0.2 + 0.4 * u01(gen);
        break;
      case 1:
        a.kind = AttackSpec::Kind::ZeroInterval;
        a.len = 6 + (int)(gen() % 7);
        a.start = (int)(gen() % (std::uint64_t)(kIntervalsPerDay - a.len + 1));
        break;
      default:
        a.kind = AttackSpec::Kind::NightShift;
        a.fraction = 0.25 + 0.25 * u01(gen);
        break;
    }
    c.series[(size_t)idx] = inject_fraud(c.series[(size_t)idx], a);
    c.manifest.roster.push_back({c.series[(size_t)idx].meter_id, a});
  }
  return c;
}

std::vector<MeterSeries> corpus_from_manifest(const CorpusManifest& m) {
  auto series = synthesize(m.n_meters, m.days, m.seed, m.start);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < series.size(); ++i) index[series[i].meter_id] = i;
  for (const auto& r : m.roster) {
    auto it = index.find(r.meter_id);
    if (it == index.end()) throw DataFileError("roster meter not in corpus: " + r.meter_id);
    series[it->second] = inject_fraud(series[it->second], r.attack);
  }
  return series;
}

void apply_roster_labels(std::vector<MeterSeries>& series, const CorpusManifest& m) {
  std::map<std::string, const RosterEntry*> roster;
  for (const auto& r : m.roster) roster[r.meter_id] = &r;
  for (auto& s : series) {
    auto it = roster.find(s.meter_id);
    if (it != roster.end()) {
      s.label = Label::Malicious;
      s.attack = it->second->attack;
    } else {
      s.label = Label::Normal;
      s.attack.reset();
    }
  }
}

}  // namespace secmeter
