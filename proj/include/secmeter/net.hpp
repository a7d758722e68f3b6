#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "secmeter/field.hpp"

namespace secmeter {

enum class Role { Client, ComputeParty, Supplier };

const char* role_name(Role r);

struct Endpoint {
  Role role;
  int id;
  friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

std::string endpoint_name(const Endpoint& e);

enum class Phase { Offline, Online, MacCheck };
constexpr int kNumPhases = 3;
const char* phase_name(Phase p);

struct Message {
  Endpoint from;
  Endpoint to;
  std::uint32_t round = 0;
  std::vector<std::uint8_t> payload;
};

// Adds delta (mod p) to the first 8-byte word of the message_index-th
// message delivered to `target`, counting all deliveries to that endpoint.
struct TamperAction {
  Endpoint target;
  std::uint64_t message_index = 0;
  std::uint64_t delta = 0;
};

struct PhaseCounters {
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint32_t rounds = 0;  // rounds in which this endpoint sent at least one message
  std::uint64_t cpu_micros = 0;
  std::int64_t last_sent_round = -1;
};

struct NetStats {
  std::map<std::pair<Endpoint, int>, PhaseCounters> per;
  std::uint64_t total_sent = 0;
  std::uint64_t total_received = 0;

  PhaseCounters& at(const Endpoint& e, Phase p) { return per[{e, (int)p}]; }
  std::uint64_t bytes_sent(const Endpoint& e) const;
  std::uint64_t bytes_received(const Endpoint& e) const;
  std::uint64_t cpu_micros_total(const Endpoint& e) const;
};

// Deterministic in-process message passing. Delivery is immediate, reliable
// and ordered; a broadcast is modeled as one unicast per destination, so
// global bytes_sent always equals bytes_received.
class SimNetwork {
 public:
  explicit SimNetwork(Field field) : field_(field) {}

  void register_endpoint(const Endpoint& e);
  void set_phase(Phase p) { phase_ = p; }
  Phase phase() const { return phase_; }
  std::uint32_t begin_round() { return ++round_; }
  std::uint32_t round() const { return round_; }

  // Sends and delivers one message; returns the payload as delivered
  // (post-tamper). The recipient's inbox also receives it.
  const std::vector<std::uint8_t>& send(const Endpoint& from, const Endpoint& to,
                                        std::vector<std::uint8_t> payload);

  // Delivery of per-producer outboxes in canonical order: outbox index
  // ascending, then message order within an outbox. The threaded executor
  // relies on this to keep transcripts byte-identical with sequential mode.
  using Outbox = std::vector<Message>;
  void deliver_outboxes(std::vector<Outbox>& outboxes);

  std::vector<Message>& inbox(const Endpoint& e) { return inboxes_[e]; }
  void clear_inbox(const Endpoint& e) { inboxes_[e].clear(); }

  void set_tampers(std::vector<TamperAction> t) { tampers_ = std::move(t); }
  std::size_t tampers_applied() const { return tampers_applied_; }
  std::uint64_t deliveries_to(const Endpoint& e) const;
  const std::map<Endpoint, std::uint64_t>& delivery_counts() const { return delivery_count_; }

  void add_cpu(const Endpoint& e, Phase p, std::uint64_t micros) {
    stats_.at(e, p).cpu_micros += micros;
  }

  NetStats& stats() { return stats_; }
  const NetStats& stats() const { return stats_; }
  std::uint64_t transcript_hash() const { return transcript_hash_; }
  std::uint64_t messages_delivered() const { return messages_delivered_; }

 private:
  void deliver(Message&& m);

  Field field_;
  Phase phase_ = Phase::Offline;
  std::uint32_t round_ = 0;
  NetStats stats_;
  std::map<Endpoint, std::vector<Message>> inboxes_;
  std::map<Endpoint, std::uint64_t> delivery_count_;
  std::vector<TamperAction> tampers_;
  std::vector<bool> tamper_done_;
  std::size_t tampers_applied_ = 0;
  std::uint64_t transcript_hash_ = 0xcbf29ce484222325ull;  // FNV-1a offset basis
  std::uint64_t messages_delivered_ = 0;
};

enum class ExecMode { Sequential, Threaded };

// Runs fn(i) for i in [0, n), either in-order on this thread or on one
// thread per index with a join barrier. Returns per-index thread CPU time
// in microseconds. fn must only touch index-local state.
std::vector<std::uint64_t> run_party_round(ExecMode mode, int n,
                                           const std::function<void(int)>& fn);

}  // namespace secmeter
