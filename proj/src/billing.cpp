#include "secmeter/billing.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace secmeter {

namespace {

bool power_of_ten(std::uint64_t x) {
  while (x > 1) {
    if (x % 10 != 0) return false;
    x /= 10;
  }
  return x == 1;
}

void check_prices(const std::vector<double>& prices, std::size_t n_intervals,
                  const char* label) {
  if (prices.size() != n_intervals)
    throw ConfigError(std::string(label) + ": expected " + std::to_string(n_intervals) +
                      " interval prices, got " + std::to_string(prices.size()));
  for (double p : prices)
    if (!(p >= 0.0) || !std::isfinite(p))
      throw ConfigError(std::string(label) + ": prices must be non-negative");
}

std::uint64_t pow_u64(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

void Tariff::validate(std::size_t n_intervals) const {
  if (mode == TariffMode::StaticTOU) {
    check_prices(interval_prices, n_intervals, "tariff");
  } else {
    check_prices(base_prices, n_intervals, "tariff");
    if (!(congestion_k >= 0.0) || !std::isfinite(congestion_k))
      throw ConfigError("tariff: congestion coefficient must be non-negative");
    if (!(capacity_kwh > 0.0))
      throw ConfigError("tariff: capacity must be positive");
  }
}

std::string tariff_to_json(const Tariff& t) {
  nlohmann::json j;
  if (t.mode == TariffMode::StaticTOU) {
    j["mode"] = "static";
    j["interval_prices"] = t.interval_prices;
  } else {
    j["mode"] = "dynamic";
    j["base_prices"] = t.base_prices;
    j["k"] = t.congestion_k;
    j["capacity"] = t.capacity_kwh;
  }
  return j.dump(2) + "\n";
}

Tariff tariff_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad tariff JSON: ") + e.what());
  }
  try {
    Tariff t;
    std::string mode = j.at("mode").get<std::string>();
    if (mode == "static") {
      t.mode = TariffMode::StaticTOU;
      t.interval_prices = j.at("interval_prices").get<std::vector<double>>();
    } else if (mode == "dynamic") {
      t.mode = TariffMode::DynamicCongestion;
      t.base_prices = j.at("base_prices").get<std::vector<double>>();
      t.congestion_k = j.at("k").get<double>();
      t.capacity_kwh = j.at("capacity").get<double>();
    } else {
      throw ConfigError("tariff mode must be \"static\" or \"dynamic\"");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad tariff JSON: ") + e.what());
  }
}

Tariff load_tariff(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tariff file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return tariff_from_json(buf.str());
}

Tariff flat_static_tariff(std::size_t n_intervals, double price) {
  Tariff t;
  t.mode = TariffMode::StaticTOU;
  t.interval_prices.assign(n_intervals, price);
  return t;
}

Tariff flat_dynamic_tariff(std::size_t n_intervals, double base, double k, double capacity) {
  Tariff t;
  t.mode = TariffMode::DynamicCongestion;
  t.base_prices.assign(n_intervals, base);
  t.congestion_k = k;
  t.capacity_kwh = capacity;
  return t;
}

std::string BillingPeriod::id() const { return format_timestamp(start).substr(0, 10); }

std::string BillStatement::total_string() const {
  int digits = 0;
  for (std::uint64_t s = scale; s > 1; s /= 10) ++digits;
  std::int64_t whole = total_scaled / (std::int64_t)scale;
  std::int64_t frac = total_scaled % (std::int64_t)scale;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s%lld.%0*lld", total_scaled < 0 && whole == 0 ? "-" : "",
                (long long)whole, digits, (long long)(frac < 0 ? -frac : frac));
  return buf;
}

std::size_t triples_required(std::size_t n_clients, std::size_t n_intervals, TariffMode mode) {
  return mode == TariffMode::StaticTOU ? 0 : n_clients * n_intervals;
}

FieldElement aggregate_load(MpcEngine& engine,
                            const std::vector<std::vector<SharedValue>>& readings_by_client,
                            std::size_t t) {
  if (readings_by_client.empty()) throw ConfigError("aggregate_load: need at least one client");
  SharedValue agg = readings_by_client[0].at(t);
  for (std::size_t c = 1; c < readings_by_client.size(); ++c)
    agg = engine.add(agg, readings_by_client[c].at(t));
  return engine.open(agg, OpenKind::Aggregate);
}

std::vector<SharedValue> static_bill_shares(
    MpcEngine& engine, const std::vector<std::vector<SharedValue>>& readings_by_client,
    const Tariff& tariff, const FixedPointCodec& codec) {
  if (tariff.mode != TariffMode::StaticTOU)
    throw ConfigError("static billing requires a static tariff");
  const Field& f = engine.field();
  std::vector<SharedValue> totals;
  totals.reserve(readings_by_client.size());
  for (const auto& readings : readings_by_client) {
    tariff.validate(readings.size());
    SharedValue total = engine.constant_share(f.zero());
    for (std::size_t t = 0; t < readings.size(); ++t) {
      FieldElement price = codec.encode(tariff.interval_prices[t]);
      total = engine.add(total, engine.mul_public(readings[t], price));
    }
    totals.push_back(std::move(total));
  }
  return totals;
}

std::vector<SharedValue> dynamic_bill_shares(
    MpcEngine& engine, const std::vector<std::vector<SharedValue>>& readings_by_client,
    const Tariff& tariff, const FixedPointCodec& codec) {
  if (tariff.mode != TariffMode::DynamicCongestion)
    throw ConfigError("dynamic billing requires a dynamic tariff");
  if (readings_by_client.empty()) return {};
  const Field& f = engine.field();
  const std::size_t n_intervals = readings_by_client[0].size();
  tariff.validate(n_intervals);
  for (const auto& r : readings_by_client)
    if (r.size() != n_intervals) throw ConfigError("clients disagree on interval count");

  // Shared per-interval aggregate; stays secret while pricing.
  std::vector<SharedValue> aggregates(n_intervals);
  for (std::size_t t = 0; t < n_intervals; ++t) {
    SharedValue agg = readings_by_client[0][t];
    for (std::size_t c = 1; c < readings_by_client.size(); ++c)
      agg = engine.add(agg, readings_by_client[c][t]);
    aggregates[t] = std::move(agg);
  }

  // price_t = base_t + k * agg_t, carried at scale^2
  FieldElement k_scaled = codec.encode(tariff.congestion_k);
  std::vector<SharedValue> prices(n_intervals);
  for (std::size_t t = 0; t < n_intervals; ++t) {
    FieldElement base = codec.encode_at(tariff.base_prices[t],
                                        codec.scale() * codec.scale());
    prices[t] = engine.add_public(engine.mul_public(aggregates[t], k_scaled), base);
  }

  // cost_{c,t} = price_t * reading_{c,t}; one batched broadcast round
  std::vector<SharedValue> xs, ys;
  xs.reserve(readings_by_client.size() * n_intervals);
  ys.reserve(xs.capacity());
  for (const auto& readings : readings_by_client)
    for (std::size_t t = 0; t < n_intervals; ++t) {
      xs.push_back(prices[t]);
      ys.push_back(readings[t]);
    }
  auto costs = engine.beaver_mul_batch(xs, ys);

  std::vector<SharedValue> totals(readings_by_client.size());
  for (std::size_t c = 0; c < readings_by_client.size(); ++c) {
    SharedValue total = engine.constant_share(f.zero());
    for (std::size_t t = 0; t < n_intervals; ++t)
      total = engine.add(total, costs[c * n_intervals + t]);
    totals[c] = std::move(total);
  }
  return totals;
}

std::vector<BillStatement> settle_bills(MpcEngine& engine,
                                        const std::vector<SharedValue>& totals,
                                        const std::vector<std::string>& client_ids,
                                        const std::vector<Endpoint>& client_endpoints,
                                        const Endpoint& supplier, const std::string& period_id,
                                        const FixedPointCodec& codec, int scale_power) {
  if (totals.size() != client_ids.size() || totals.size() != client_endpoints.size())
    throw ConfigError("settle_bills: client count mismatch");
  if (!power_of_ten(codec.scale()))
    throw ConfigError("settle_bills: codec scale must be a power of ten");
  if (totals.empty()) return {};

  std::vector<std::size_t> slots(totals.size());
  for (auto& s : slots) s = engine.take_output_slot();

  auto views = engine.open_masked_batch(totals, slots);
  if (engine.check_macs() != MacCheckResult::Pass)
    throw BillingAbortedError("mac check failed; billing period aborted");

  std::vector<std::vector<Endpoint>> receivers(totals.size());
  for (std::size_t c = 0; c < totals.size(); ++c)
    receivers[c] = {client_endpoints[c], supplier};
  auto delivered = engine.deliver_masked_outputs(views, receivers);

  const Field& f = engine.field();
  std::vector<BillStatement> bills;
  bills.reserve(totals.size());
  for (std::size_t c = 0; c < totals.size(); ++c) {
    if (!delivered[c].consistent)
      throw BillingAbortedError("inconsistent bill delivery; billing period aborted");
    FieldElement total_fe = f.sub(delivered[c].masked, engine.output_mask_clear(slots[c]));
    std::int64_t raw = codec.decode_scaled(total_fe);
    std::int64_t denom = (std::int64_t)pow_u64(codec.scale(), scale_power - 1);
    BillStatement b;
    b.client_id = client_ids[c];
    b.period_id = period_id;
    b.total_scaled = round_div_half_away(raw, denom);
    b.scale = codec.scale();
    b.mac_check_passed = true;
    bills.push_back(std::move(b));
  }
  return bills;
}

std::vector<BillStatement> bill_static(MpcEngine& engine,
                                       const std::vector<std::vector<SharedValue>>& readings_by_client,
                                       const Tariff& tariff, const FixedPointCodec& codec,
                                       const std::vector<std::string>& client_ids,
                                       const std::vector<Endpoint>& client_endpoints,
                                       const Endpoint& supplier, const std::string& period_id) {
  auto totals = static_bill_shares(engine, readings_by_client, tariff, codec);
  return settle_bills(engine, totals, client_ids, client_endpoints, supplier, period_id, codec,
                      kStaticScalePower);
}

std::vector<BillStatement> bill_dynamic(MpcEngine& engine,
                                        const std::vector<std::vector<SharedValue>>& readings_by_client,
                                        const Tariff& tariff, const FixedPointCodec& codec,
                                        const std::vector<std::string>& client_ids,
                                        const std::vector<Endpoint>& client_endpoints,
                                        const Endpoint& supplier, const std::string& period_id) {
  auto totals = dynamic_bill_shares(engine, readings_by_client, tariff, codec);
  return settle_bills(engine, totals, client_ids, client_endpoints, supplier, period_id, codec,
                      kDynamicScalePower);
}

std::string bills_to_csv(const std::vector<BillStatement>& bills) {
  std::ostringstream out;
  out << "client_id,period_id,total,mac_check\n";
  for (const auto& b : bills)
    out << b.client_id << ',' << b.period_id << ',' << b.total_string() << ','
        << (b.mac_check_passed ? "pass" : "fail") << '\n';
  return out.str();
}

}  // namespace secmeter
