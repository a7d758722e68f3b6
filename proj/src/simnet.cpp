#include "secmeter/simnet.hpp"

#include <ctime>
#include <sstream>

#include <json.hpp>

namespace secmeter {

namespace {

std::uint64_t thread_cpu_micros() {
  timespec ts;
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return (std::uint64_t)ts.tv_sec * 1000000ull + (std::uint64_t)ts.tv_nsec / 1000ull;
}

nlohmann::json attack_json(const AttackSpec& a) {
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
  if (a.range_begin != 0 || a.range_end != 0) {
    j["range_begin"] = a.range_begin;
    j["range_end"] = a.range_end;
  }
  return j;
}

AttackSpec attack_from(const nlohmann::json& j) {
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

Endpoint endpoint_from_name(const std::string& name) {
  auto colon = name.find(':');
  if (colon == std::string::npos) throw ConfigError("bad endpoint name: " + name);
  std::string role = name.substr(0, colon);
  int id = 0;
  try {
    id = std::stoi(name.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("bad endpoint name: " + name);
  }
  if (role == "client") return {Role::Client, id};
  if (role == "party") return {Role::ComputeParty, id};
  if (role == "supplier") return {Role::Supplier, id};
  throw ConfigError("bad endpoint role: " + role);
}

std::string adversary_to_json(const AdversaryScript& script) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : script) {
    nlohmann::json j;
    if (a.kind == AdversaryAction::Kind::TamperShare) {
      j["action"] = "tamper_share";
      j["target"] = endpoint_name(a.tamper.target);
      j["message_index"] = a.tamper.message_index;
      j["delta"] = a.tamper.delta;
    } else {
      j["action"] = "inject_fraud";
      j["client_index"] = a.client_index;
      j["attack"] = attack_json(a.attack);
    }
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

AdversaryScript adversary_from_json(const std::string& text) {
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad adversary JSON: ") + e.what());
  }
  try {
    AdversaryScript script;
    for (const auto& j : arr) {
      AdversaryAction a;
      std::string action = j.at("action").get<std::string>();
      if (action == "tamper_share") {
        a.kind = AdversaryAction::Kind::TamperShare;
        a.tamper.target = endpoint_from_name(j.at("target").get<std::string>());
        a.tamper.message_index = j.at("message_index").get<std::uint64_t>();
        a.tamper.delta = j.at("delta").get<std::uint64_t>();
      } else if (action == "inject_fraud") {
        a.kind = AdversaryAction::Kind::InjectFraud;
        a.client_index = j.at("client_index").get<int>();
        a.attack = attack_from(j.at("attack"));
      } else {
        throw ConfigError("unknown adversary action: " + action);
      }
      script.push_back(a);
    }
    return script;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad adversary JSON: ") + e.what());
  }
}

BillingRunResult run_billing_period(const std::vector<MeterSeries>& corpus,
                                    const BillingRunParams& params,
                                    const AdversaryScript& adversary) {
  if (params.n_parties < 2) throw ConfigError("need at least 2 compute parties");
  if (!is_prime_u64(params.modulus)) throw ConfigError("field modulus must be prime");

  BillingRunResult result;
  result.effective_corpus = corpus;
  std::vector<TamperAction> tampers;
  for (const auto& a : adversary) {
    if (a.kind == AdversaryAction::Kind::InjectFraud) {
      if (a.client_index < 0 || (std::size_t)a.client_index >= corpus.size())
        throw ConfigError("inject_fraud client index out of range");
      result.effective_corpus[(size_t)a.client_index] =
          inject_fraud(result.effective_corpus[(size_t)a.client_index], a.attack);
    } else {
      tampers.push_back(a.tamper);
    }
  }

  const std::size_t n_clients = result.effective_corpus.size();
  const std::size_t n_intervals = n_clients == 0 ? 0 : result.effective_corpus[0].readings.size();
  for (const auto& s : result.effective_corpus)
    if (s.readings.size() != n_intervals)
      throw ConfigError("clients disagree on billing-period length");
  if (n_clients > 0) params.tariff.validate(n_intervals);

  BillingPeriod period{n_clients == 0 ? default_corpus_start() : result.effective_corpus[0].start,
                       (int)n_intervals};
  result.period_id = period.id();

  Field field(params.modulus);
  FixedPointCodec codec(field, params.scale);
  SimNetwork net(field);
  net.set_tampers(tampers);

  // Offline phase: the trusted dealer replaces cryptographic preprocessing,
  // so it costs CPU but no network traffic.
  net.set_phase(Phase::Offline);
  std::uint64_t t0 = thread_cpu_micros();
  DealCounts counts{n_clients * n_intervals,
                    triples_required(n_clients, n_intervals, params.tariff.mode), n_clients};
  DealerMaterial material = offline_deal(field, counts, params.n_parties, params.seed);
  MpcEngine engine(material, net, params.exec, params.timing);
  std::uint64_t offline_micros = thread_cpu_micros() - t0;

  Endpoint supplier{Role::Supplier, 0};
  net.register_endpoint(supplier);
  std::vector<Endpoint> client_eps;
  std::vector<std::string> client_ids;
  for (std::size_t c = 0; c < n_clients; ++c) {
    Endpoint ep{Role::Client, (int)c};
    net.register_endpoint(ep);
    client_eps.push_back(ep);
    client_ids.push_back(result.effective_corpus[c].meter_id);
  }
  if (params.timing)
    for (int i = 0; i < params.n_parties; ++i)
      net.add_cpu({Role::ComputeParty, i}, Phase::Offline, offline_micros);

  net.set_phase(Phase::Online);
  try {
    if (n_clients > 0) {
      // upload round: every client ships one AuthShare-sized message per
      // interval per party
      net.begin_round();
      std::vector<std::vector<SharedValue>> shared(n_clients);
      for (std::size_t c = 0; c < n_clients; ++c) {
        std::uint64_t c0 = thread_cpu_micros();
        std::vector<FieldElement> encoded;
        encoded.reserve(n_intervals);
        for (double r : result.effective_corpus[c].readings) encoded.push_back(codec.encode(r));
        shared[c] = engine.share_input_batch(client_eps[c], encoded);
        if (params.timing) net.add_cpu(client_eps[c], Phase::Online, thread_cpu_micros() - c0);
      }

      result.statements =
          params.tariff.mode == TariffMode::StaticTOU
              ? bill_static(engine, shared, params.tariff, codec, client_ids, client_eps,
                            supplier, result.period_id)
              : bill_dynamic(engine, shared, params.tariff, codec, client_ids, client_eps,
                             supplier, result.period_id);
    }
  } catch (const BillingAbortedError& e) {
    result.aborted = true;
    result.statements.clear();
    result.alerts.push_back({"tamper_detected", e.what()});
  }

  result.stats = net.stats();
  result.transcript_hash = net.transcript_hash();
  result.rounds = net.round();
  result.tampers_applied = net.tampers_applied();
  result.deliveries = net.delivery_counts();
  return result;
}

TrafficPrediction predict_bytes(std::size_t n_clients, std::size_t n_intervals, int n_parties,
                                TariffMode mode) {
  TrafficPrediction p;
  p.triples = triples_required(n_clients, n_intervals, mode);
  if (n_clients == 0) return p;

  const std::uint64_t nc = n_clients, T = n_intervals;
  const std::uint64_t np = (std::uint64_t)n_parties;
  const std::uint64_t peers = np - 1;

  // Clients upload one 16-byte (share, correction) message per interval per
  // party and download n_parties copies of their masked total.
  p.client.online_sent = 16 * T * np;
  p.client.online_recv = 8 * np;
  p.client.online_rounds = 1;
  p.client_upload = p.client.online_sent;

  // Parties: receive all uploads, broadcast masked-total openings, send the
  // opened totals to each client and (batched) to the supplier. Dynamic mode
  // adds one 16-byte broadcast per product per destination party; this never
  // touches the clients.
  std::uint64_t beaver = mode == TariffMode::DynamicCongestion ? 16 * nc * T * peers : 0;
  p.party.online_sent = beaver + 8 * nc * peers + 8 * nc + 8 * nc;
  p.party.online_recv = 16 * T * nc + beaver + 8 * nc * peers;
  p.party.online_rounds = mode == TariffMode::DynamicCongestion ? 3u : 2u;
  // commit (32 bytes) and reveal (16 bytes) to every peer, once per period
  p.party.maccheck_sent = 48 * peers;
  p.party.maccheck_recv = 48 * peers;
  p.party.maccheck_rounds = 2;

  p.supplier.online_recv = 8 * nc * np;
  return p;
}

bool stats_match_prediction(const NetStats& stats, std::size_t n_clients, int n_parties,
                            const TrafficPrediction& p, std::string* mismatch) {
  auto check = [&](const Endpoint& e, const EndpointTraffic& want) {
    auto get = [&](Phase ph) {
      auto it = stats.per.find({e, (int)ph});
      return it == stats.per.end() ? PhaseCounters{} : it->second;
    };
    PhaseCounters offline = get(Phase::Offline);
    PhaseCounters online = get(Phase::Online);
    PhaseCounters mac = get(Phase::MacCheck);
    auto fail = [&](const std::string& what, std::uint64_t got, std::uint64_t want_v) {
      if (mismatch)
        *mismatch = endpoint_name(e) + " " + what + ": measured " + std::to_string(got) +
                    ", modeled " + std::to_string(want_v);
      return false;
    };
    if (offline.bytes_sent != 0) return fail("offline_sent", offline.bytes_sent, 0);
    if (offline.bytes_received != 0) return fail("offline_recv", offline.bytes_received, 0);
    if (online.bytes_sent != want.online_sent)
      return fail("online_sent", online.bytes_sent, want.online_sent);
    if (online.bytes_received != want.online_recv)
      return fail("online_recv", online.bytes_received, want.online_recv);
    if (mac.bytes_sent != want.maccheck_sent)
      return fail("maccheck_sent", mac.bytes_sent, want.maccheck_sent);
    if (mac.bytes_received != want.maccheck_recv)
      return fail("maccheck_recv", mac.bytes_received, want.maccheck_recv);
    if (online.rounds != want.online_rounds)
      return fail("online_rounds", online.rounds, want.online_rounds);
    if (mac.rounds != want.maccheck_rounds)
      return fail("maccheck_rounds", mac.rounds, want.maccheck_rounds);
    return true;
  };

  for (std::size_t c = 0; c < n_clients; ++c)
    if (!check({Role::Client, (int)c}, p.client)) return false;
  for (int i = 0; i < n_parties; ++i)
    if (!check({Role::ComputeParty, i}, p.party)) return false;
  if (!check({Role::Supplier, 0}, p.supplier)) return false;
  if (stats.total_sent != stats.total_received) {
    if (mismatch) *mismatch = "conservation violated";
    return false;
  }
  return true;
}

std::string stats_to_csv(const NetStats& stats) {
  std::ostringstream out;
  out << "endpoint,role,phase,bytes_sent,bytes_received,rounds,cpu_micros\n";
  for (const auto& [key, c] : stats.per) {
    const auto& [ep, phase] = key;
    out << endpoint_name(ep) << ',' << role_name(ep.role) << ',' << phase_name((Phase)phase)
        << ',' << c.bytes_sent << ',' << c.bytes_received << ',' << c.rounds << ','
        << c.cpu_micros << '\n';
  }
  return out.str();
}

std::string alerts_to_csv(const std::vector<Alert>& alerts) {
  std::ostringstream out;
  out << "type,detail\n";
  for (const auto& a : alerts) out << a.type << ',' << a.detail << '\n';
  return out.str();
}

}  // namespace secmeter
