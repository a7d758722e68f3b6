#include "secmeter/net.hpp"

#include <ctime>
#include <thread>

namespace secmeter {

const char* role_name(Role r) {
  switch (r) {
    case Role::Client: return "client";
    case Role::ComputeParty: return "party";
    case Role::Supplier: return "supplier";
  }
  return "?";
}

std::string endpoint_name(const Endpoint& e) {
  return std::string(role_name(e.role)) + ":" + std::to_string(e.id);
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Offline: return "offline";
    case Phase::Online: return "online";
    case Phase::MacCheck: return "mac_check";
  }
  return "?";
}

std::uint64_t NetStats::bytes_sent(const Endpoint& e) const {
  std::uint64_t n = 0;
  for (int p = 0; p < kNumPhases; ++p) {
    auto it = per.find({e, p});
    if (it != per.end()) n += it->second.bytes_sent;
  }
  return n;
}

std::uint64_t NetStats::bytes_received(const Endpoint& e) const {
  std::uint64_t n = 0;
  for (int p = 0; p < kNumPhases; ++p) {
    auto it = per.find({e, p});
    if (it != per.end()) n += it->second.bytes_received;
  }
  return n;
}

std::uint64_t NetStats::cpu_micros_total(const Endpoint& e) const {
  std::uint64_t n = 0;
  for (int p = 0; p < kNumPhases; ++p) {
    auto it = per.find({e, p});
    if (it != per.end()) n += it->second.cpu_micros;
  }
  return n;
}

void SimNetwork::register_endpoint(const Endpoint& e) {
  inboxes_[e];
  delivery_count_[e];
  for (int p = 0; p < kNumPhases; ++p) stats_.per[{e, p}];
}

const std::vector<std::uint8_t>& SimNetwork::send(const Endpoint& from, const Endpoint& to,
                                                  std::vector<std::uint8_t> payload) {
  deliver({from, to, round_, std::move(payload)});
  return inboxes_[to].back().payload;
}

void SimNetwork::deliver_outboxes(std::vector<Outbox>& outboxes) {
  for (auto& box : outboxes) {
    for (auto& m : box) {
      m.round = round_;
      deliver(std::move(m));
    }
    box.clear();
  }
}

void SimNetwork::deliver(Message&& m) {
  std::uint64_t& count = delivery_count_[m.to];
  if (tamper_done_.size() != tampers_.size()) tamper_done_.assign(tampers_.size(), false);
  for (std::size_t i = 0; i < tampers_.size(); ++i) {
    const TamperAction& t = tampers_[i];
    if (tamper_done_[i] || t.target != m.to || count != t.message_index || m.payload.size() < 8)
      continue;
    FieldElement w = field_.from_bytes(m.payload.data());
    FieldElement v = field_.add(w, field_.from_u64(t.delta));
    auto bytes = Field::to_bytes(v);
    std::copy(bytes.begin(), bytes.end(), m.payload.begin());
    tamper_done_[i] = true;
    ++tampers_applied_;
  }
  ++count;

  auto& sent = stats_.at(m.from, phase_);
  sent.bytes_sent += m.payload.size();
  if (sent.last_sent_round != (std::int64_t)m.round) {
    sent.last_sent_round = (std::int64_t)m.round;
    ++sent.rounds;
  }
  auto& recv = stats_.at(m.to, phase_);
  recv.bytes_received += m.payload.size();
  stats_.total_sent += m.payload.size();
  stats_.total_received += m.payload.size();

  auto fold = [&](std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      transcript_hash_ ^= (x >> (8 * i)) & 0xff;
      transcript_hash_ *= 0x100000001b3ull;  // FNV-1a prime
    }
  };
  fold(((std::uint64_t)m.from.role << 32) | (std::uint32_t)m.from.id);
  fold(((std::uint64_t)m.to.role << 32) | (std::uint32_t)m.to.id);
  fold(m.round);
  fold(m.payload.size());
  for (std::uint8_t b : m.payload) {
    transcript_hash_ ^= b;
    transcript_hash_ *= 0x100000001b3ull;
  }

  ++messages_delivered_;
  inboxes_[m.to].push_back(std::move(m));
}

std::uint64_t SimNetwork::deliveries_to(const Endpoint& e) const {
  auto it = delivery_count_.find(e);
  return it == delivery_count_.end() ? 0 : it->second;
}

namespace {

std::uint64_t thread_cpu_micros() {
  timespec ts;
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return (std::uint64_t)ts.tv_sec * 1000000ull + (std::uint64_t)ts.tv_nsec / 1000ull;
}

}  // namespace

std::vector<std::uint64_t> run_party_round(ExecMode mode, int n,
                                           const std::function<void(int)>& fn) {
  std::vector<std::uint64_t> micros((size_t)n, 0);
  if (mode == ExecMode::Sequential) {
    for (int i = 0; i < n; ++i) {
      std::uint64_t t0 = thread_cpu_micros();
      fn(i);
      micros[(size_t)i] = thread_cpu_micros() - t0;
    }
    return micros;
  }
  std::vector<std::thread> threads;
  threads.reserve((size_t)n);
  for (int i = 0; i < n; ++i) {
    threads.emplace_back([&, i] {
      std::uint64_t t0 = thread_cpu_micros();
      fn(i);
      micros[(size_t)i] = thread_cpu_micros() - t0;
    });
  }
  for (auto& t : threads) t.join();
  return micros;
}

}  // namespace secmeter
