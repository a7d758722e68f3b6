#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "secmeter/billing.hpp"
#include "secmeter/ingest.hpp"
#include "secmeter/net.hpp"

namespace secmeter {

struct AdversaryAction {
  enum class Kind { TamperShare, InjectFraud };
  Kind kind = Kind::TamperShare;
  TamperAction tamper;     // TamperShare
  int client_index = 0;    // InjectFraud
  AttackSpec attack;       // InjectFraud
};

using AdversaryScript = std::vector<AdversaryAction>;

std::string adversary_to_json(const AdversaryScript& script);
AdversaryScript adversary_from_json(const std::string& text);
Endpoint endpoint_from_name(const std::string& name);

struct Alert {
  std::string type;
  std::string detail;
};

struct BillingRunParams {
  Tariff tariff;
  int n_parties = 3;
  std::uint64_t seed = 1;
  std::uint64_t modulus = Field::kMersenne61;
  std::uint64_t scale = 1000;
  ExecMode exec = ExecMode::Sequential;
  bool timing = false;
};

struct BillingRunResult {
  std::vector<BillStatement> statements;
  std::vector<Alert> alerts;
  bool aborted = false;
  NetStats stats;
  std::uint64_t transcript_hash = 0;
  std::uint32_t rounds = 0;
  std::size_t tampers_applied = 0;
  std::map<Endpoint, std::uint64_t> deliveries;   // tamper-target space
  std::vector<MeterSeries> effective_corpus;      // after InjectFraud actions
  std::string period_id;
};

// One billing period end to end: trusted-dealer offline phase, client share
// upload, billing circuit, batched MAC check, masked result delivery.
// Deterministic per (corpus, params); TamperShare adversaries abort the
// period with an alert, InjectFraud adversaries relabel the corpus.
BillingRunResult run_billing_period(const std::vector<MeterSeries>& corpus,
                                    const BillingRunParams& params,
                                    const AdversaryScript& adversary = {});

// Exact analytic byte/round model; run_billing_period must measure exactly
// these numbers (the client upload is 16 bytes per interval per party, and
// dynamic-mode multiplication traffic is charged to compute parties only).
struct EndpointTraffic {
  std::uint64_t online_sent = 0;
  std::uint64_t online_recv = 0;
  std::uint64_t maccheck_sent = 0;
  std::uint64_t maccheck_recv = 0;
  std::uint32_t online_rounds = 0;
  std::uint32_t maccheck_rounds = 0;
};

struct TrafficPrediction {
  EndpointTraffic client;    // each client is symmetric
  EndpointTraffic party;     // each compute party is symmetric
  EndpointTraffic supplier;
  std::uint64_t client_upload = 0;  // online bytes a client sends
  std::size_t triples = 0;
};

TrafficPrediction predict_bytes(std::size_t n_clients, std::size_t n_intervals, int n_parties,
                                TariffMode mode);

// Measured-equals-modeled comparison over every endpoint and phase.
bool stats_match_prediction(const NetStats& stats, std::size_t n_clients, int n_parties,
                            const TrafficPrediction& p, std::string* mismatch = nullptr);

std::string stats_to_csv(const NetStats& stats);
std::string alerts_to_csv(const std::vector<Alert>& alerts);

}  // namespace secmeter
