#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "secmeter/errors.hpp"
#include "secmeter/ingest.hpp"
#include "secmeter/mpc.hpp"

namespace secmeter {

struct BillingAbortedError : std::runtime_error {
  explicit BillingAbortedError(const std::string& what) : std::runtime_error(what) {}
};

enum class TariffMode { StaticTOU, DynamicCongestion };

struct Tariff {
  TariffMode mode = TariffMode::StaticTOU;
  std::vector<double> interval_prices;  // static: currency per kWh, per interval
  std::vector<double> base_prices;      // dynamic: currency per kWh, per interval
  double congestion_k = 0.0;            // currency per kWh per kWh of aggregate
  double capacity_kwh = 0.0;            // operator metadata; not part of the circuit

  void validate(std::size_t n_intervals) const;
};

std::string tariff_to_json(const Tariff& t);
Tariff tariff_from_json(const std::string& text);
Tariff load_tariff(const std::string& path);
// Flat-rate helpers for tests and data generation.
Tariff flat_static_tariff(std::size_t n_intervals, double price);
Tariff flat_dynamic_tariff(std::size_t n_intervals, double base, double k, double capacity);

struct BillingPeriod {
  Timestamp start = 0;
  int n_intervals = 0;
  std::string id() const;  // ISO date of the period start
};

struct BillStatement {
  std::string client_id;
  std::string period_id;
  std::int64_t total_scaled = 0;  // currency at the codec scale (default milli-units)
  std::uint64_t scale = 1000;
  bool mac_check_passed = false;
  std::string total_string() const;
};

// Totals accumulate deferred scale: price(s)*reading(s) for static,
// price(s^2)*reading(s) for dynamic; one rounded division at decode.
constexpr int kStaticScalePower = 2;
constexpr int kDynamicScalePower = 3;

std::size_t triples_required(std::size_t n_clients, std::size_t n_intervals, TariffMode mode);

// Sum of all clients' shares at interval t, opened to the parties.
FieldElement aggregate_load(MpcEngine& engine,
                            const std::vector<std::vector<SharedValue>>& readings_by_client,
                            std::size_t t);

// Per-client bill total as shares. Static consumes no triples; dynamic
// prices each interval off the still-secret aggregate and consumes one
// triple per (client, interval).
std::vector<SharedValue> static_bill_shares(
    MpcEngine& engine, const std::vector<std::vector<SharedValue>>& readings_by_client,
    const Tariff& tariff, const FixedPointCodec& codec);
std::vector<SharedValue> dynamic_bill_shares(
    MpcEngine& engine, const std::vector<std::vector<SharedValue>>& readings_by_client,
    const Tariff& tariff, const FixedPointCodec& codec);

// Opens the totals through fresh output masks, runs the batched MAC check,
// and delivers the masked openings to each client and the supplier. Throws
// BillingAbortedError on a MAC failure or inconsistent deliveries; a
// statement is only ever issued after a passing check.
std::vector<BillStatement> settle_bills(MpcEngine& engine,
                                        const std::vector<SharedValue>& totals,
                                        const std::vector<std::string>& client_ids,
                                        const std::vector<Endpoint>& client_endpoints,
                                        const Endpoint& supplier, const std::string& period_id,
                                        const FixedPointCodec& codec, int scale_power);

std::vector<BillStatement> bill_static(MpcEngine& engine,
                                       const std::vector<std::vector<SharedValue>>& readings_by_client,
                                       const Tariff& tariff, const FixedPointCodec& codec,
                                       const std::vector<std::string>& client_ids,
                                       const std::vector<Endpoint>& client_endpoints,
                                       const Endpoint& supplier, const std::string& period_id);
std::vector<BillStatement> bill_dynamic(MpcEngine& engine,
                                        const std::vector<std::vector<SharedValue>>& readings_by_client,
                                        const Tariff& tariff, const FixedPointCodec& codec,
                                        const std::vector<std::string>& client_ids,
                                        const std::vector<Endpoint>& client_endpoints,
                                        const Endpoint& supplier, const std::string& period_id);

std::string bills_to_csv(const std::vector<BillStatement>& bills);

}  // namespace secmeter
