#include "secmeter/mpc.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstring>
#include <fstream>

namespace secmeter {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::array<std::uint8_t, 32> sha256(const std::uint8_t* data, std::size_t len) {
  std::array<std::uint8_t, 32> out{};
  unsigned int outlen = 0;
  EVP_Digest(data, len, out.data(), &outlen, EVP_sha256(), nullptr);
  return out;
}

void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) buf.push_back((std::uint8_t)(x >> (8 * i)));
}

void put_fe(std::vector<std::uint8_t>& buf, FieldElement e) {
  put_u64(buf, e.v);
}

std::uint64_t get_u64(const std::uint8_t* b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= (std::uint64_t)b[i] << (8 * i);
  return v;
}

// Splits x into n additive shares: n-1 uniform draws plus a remainder.
std::vector<FieldElement> split_additive(const Field& f, FieldElement x, int n, FieldRng& rng) {
  std::vector<FieldElement> shares((size_t)n);
  FieldElement acc = f.zero();
  for (int i = 0; i < n - 1; ++i) {
    shares[(size_t)i] = rng.next(f);
    acc = f.add(acc, shares[(size_t)i]);
  }
  shares[(size_t)n - 1] = f.sub(x, acc);
  return shares;
}

std::vector<AuthShare> share_auth(const Field& f, FieldElement x, FieldElement alpha, int n,
                                  FieldRng& rng) {
  auto values = split_additive(f, x, n, rng);
  auto macs = split_additive(f, f.mul(alpha, x), n, rng);
  std::vector<AuthShare> out((size_t)n);
  for (int i = 0; i < n; ++i) out[(size_t)i] = {values[(size_t)i], macs[(size_t)i], i};
  return out;
}

}  // namespace

AuthShare add_shares(const Field& f, const AuthShare& a, const AuthShare& b) {
  if (a.owner != b.owner) throw OwnerMismatchError();
  return {f.add(a.value, b.value), f.add(a.mac, b.mac), a.owner};
}

AuthShare sub_shares(const Field& f, const AuthShare& a, const AuthShare& b) {
  if (a.owner != b.owner) throw OwnerMismatchError();
  return {f.sub(a.value, b.value), f.sub(a.mac, b.mac), a.owner};
}

AuthShare mul_public(const Field& f, const AuthShare& a, FieldElement k) {
  return {f.mul(a.value, k), f.mul(a.mac, k), a.owner};
}

AuthShare add_public(const Field& f, const AuthShare& a, FieldElement k, FieldElement alpha_share) {
  FieldElement value = a.owner == 0 ? f.add(a.value, k) : a.value;
  return {value, f.add(a.mac, f.mul(k, alpha_share)), a.owner};
}

DealerMaterial offline_deal(const Field& f, const DealCounts& counts, int n_parties,
                            std::uint64_t seed) {
  if (n_parties < 2) throw ProtocolError("mpc: need at least 2 parties");
  DealerMaterial m;
  m.field = f;
  m.n_parties = n_parties;
  m.seed = seed;
  FieldRng rng(seed);
  m.alpha = rng.next(f);
  m.alpha_shares = split_additive(f, m.alpha, n_parties, rng);

  m.triples.resize(counts.triples);
  for (std::size_t t = 0; t < counts.triples; ++t) {
    FieldElement a = rng.next(f);
    FieldElement b = rng.next(f);
    FieldElement c = f.mul(a, b);
    auto sa = share_auth(f, a, m.alpha, n_parties, rng);
    auto sb = share_auth(f, b, m.alpha, n_parties, rng);
    auto sc = share_auth(f, c, m.alpha, n_parties, rng);
    m.triples[t].resize((size_t)n_parties);
    for (int i = 0; i < n_parties; ++i)
      m.triples[t][(size_t)i] = {sa[(size_t)i], sb[(size_t)i], sc[(size_t)i]};
  }

  m.input_masks.resize(counts.inputs);
  m.input_mask_macs.resize(counts.inputs);
  for (std::size_t s = 0; s < counts.inputs; ++s) {
    FieldElement r = rng.next(f);
    m.input_masks[s].clear = r;
    m.input_masks[s].value_shares = split_additive(f, r, n_parties, rng);
    m.input_mask_macs[s] = split_additive(f, f.mul(m.alpha, r), n_parties, rng);
  }

  m.output_mask_clear.resize(counts.outputs);
  m.output_masks.resize(counts.outputs);
  for (std::size_t s = 0; s < counts.outputs; ++s) {
    FieldElement r = rng.next(f);
    m.output_mask_clear[s] = r;
    m.output_masks[s] = share_auth(f, r, m.alpha, n_parties, rng);
  }
  return m;
}

void save_dealer_material(const std::string& path, const DealerMaterial& m) {
  std::vector<std::uint8_t> buf;
  buf.push_back('S');
  buf.push_back('P');
  buf.push_back('D');
  buf.push_back('Z');
  buf.push_back(1);  // version u16 LE
  buf.push_back(0);
  buf.push_back((std::uint8_t)m.n_parties);
  buf.push_back((std::uint8_t)(m.n_parties >> 8));
  put_u64(buf, m.field.modulus());
  put_u64(buf, m.seed);
  put_u64(buf, m.triples.size());
  put_u64(buf, m.input_masks.size());
  put_u64(buf, m.output_masks.size());
  put_fe(buf, m.alpha);
  for (auto& s : m.alpha_shares) put_fe(buf, s);
  for (auto& t : m.triples)
    for (auto& p : t) {
      put_fe(buf, p.a.value);
      put_fe(buf, p.a.mac);
      put_fe(buf, p.b.value);
      put_fe(buf, p.b.mac);
      put_fe(buf, p.c.value);
      put_fe(buf, p.c.mac);
    }
  for (std::size_t s = 0; s < m.input_masks.size(); ++s) {
    put_fe(buf, m.input_masks[s].clear);
    for (auto& v : m.input_masks[s].value_shares) put_fe(buf, v);
    for (auto& v : m.input_mask_macs[s]) put_fe(buf, v);
  }
  for (std::size_t s = 0; s < m.output_masks.size(); ++s) {
    put_fe(buf, m.output_mask_clear[s]);
    for (auto& p : m.output_masks[s]) {
      put_fe(buf, p.value);
      put_fe(buf, p.mac);
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MaterialFormatError("cannot open material file for writing: " + path);
  out.write((const char*)buf.data(), (std::streamsize)buf.size());
}

DealerMaterial load_dealer_material(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MaterialFormatError("cannot open material file: " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > buf.size()) throw MaterialFormatError("truncated material file: " + path);
  };
  need(8);
  if (std::memcmp(buf.data(), "SPDZ", 4) != 0)
    throw MaterialFormatError("bad magic in material file: " + path);
  std::uint16_t version = (std::uint16_t)(buf[4] | (buf[5] << 8));
  if (version != 1) throw MaterialFormatError("unsupported material version");
  int n_parties = buf[6] | (buf[7] << 8);
  pos = 8;
  need(8 * 5);
  std::uint64_t modulus = get_u64(&buf[pos]);
  pos += 8;
  std::uint64_t seed = get_u64(&buf[pos]);
  pos += 8;
  std::uint64_t n_triples = get_u64(&buf[pos]);
  pos += 8;
  std::uint64_t n_inputs = get_u64(&buf[pos]);
  pos += 8;
  std::uint64_t n_outputs = get_u64(&buf[pos]);
  pos += 8;

  DealerMaterial m;
  m.field = Field(modulus);
  m.n_parties = n_parties;
  m.seed = seed;
  auto read_fe = [&]() {
    need(8);
    FieldElement e{get_u64(&buf[pos])};
    pos += 8;
    return e;
  };
  m.alpha = read_fe();
  m.alpha_shares.resize((size_t)n_parties);
  for (auto& s : m.alpha_shares) s = read_fe();
  m.triples.resize(n_triples);
  for (auto& t : m.triples) {
    t.resize((size_t)n_parties);
    for (int i = 0; i < n_parties; ++i) {
      TripleShare& p = t[(size_t)i];
      p.a = {read_fe(), read_fe(), i};
      p.b = {read_fe(), read_fe(), i};
      p.c = {read_fe(), read_fe(), i};
    }
  }
  m.input_masks.resize(n_inputs);
  m.input_mask_macs.resize(n_inputs);
  for (std::size_t s = 0; s < n_inputs; ++s) {
    m.input_masks[s].clear = read_fe();
    m.input_masks[s].value_shares.resize((size_t)n_parties);
    for (auto& v : m.input_masks[s].value_shares) v = read_fe();
    m.input_mask_macs[s].resize((size_t)n_parties);
    for (auto& v : m.input_mask_macs[s]) v = read_fe();
  }
  m.output_mask_clear.resize(n_outputs);
  m.output_masks.resize(n_outputs);
  for (std::size_t s = 0; s < n_outputs; ++s) {
    m.output_mask_clear[s] = read_fe();
    m.output_masks[s].resize((size_t)n_parties);
    for (int i = 0; i < n_parties; ++i) m.output_masks[s][(size_t)i] = {read_fe(), read_fe(), i};
  }
  if (pos != buf.size()) throw MaterialFormatError("trailing bytes in material file: " + path);
  return m;
}

FieldElement reconstruct_value(const Field& f, const std::vector<AuthShare>& shares) {
  FieldElement acc = f.zero();
  for (auto& s : shares) acc = f.add(acc, s.value);
  return acc;
}

FieldElement reconstruct_mac(const Field& f, const std::vector<AuthShare>& shares) {
  FieldElement acc = f.zero();
  for (auto& s : shares) acc = f.add(acc, s.mac);
  return acc;
}

MpcEngine::MpcEngine(const DealerMaterial& material, SimNetwork& net, ExecMode mode, bool timing)
    : field_(material.field),
      n_parties_(material.n_parties),
      input_masks_(material.input_masks),
      triple_used_(material.triples.size(), false),
      output_mask_clear_(material.output_mask_clear),
      output_used_(material.output_masks.size(), false),
      net_(net),
      mode_(mode),
      timing_(timing) {
  if (n_parties_ < 2) throw ProtocolError("mpc: need at least 2 parties");
  parties_.resize((size_t)n_parties_);
  for (int i = 0; i < n_parties_; ++i) {
    PartyState& p = parties_[(size_t)i];
    p.id = i;
    p.alpha_share = material.alpha_shares[(size_t)i];
    p.triples.resize(material.triples.size());
    for (std::size_t t = 0; t < material.triples.size(); ++t)
      p.triples[t] = material.triples[t][(size_t)i];
    p.input_mask_macs.resize(material.input_mask_macs.size());
    for (std::size_t s = 0; s < material.input_mask_macs.size(); ++s)
      p.input_mask_macs[s] = material.input_mask_macs[s][(size_t)i];
    p.output_masks.resize(material.output_masks.size());
    for (std::size_t s = 0; s < material.output_masks.size(); ++s)
      p.output_masks[s] = material.output_masks[s][(size_t)i];
    p.nonce_seed = splitmix64(material.seed ^ (0x706172747900ull + (std::uint64_t)i));
    net_.register_endpoint(party_endpoint(i));
  }
}

std::size_t MpcEngine::input_masks_remaining() const {
  return input_masks_.size() - input_cursor_;
}

SharedValue MpcEngine::share_input(const Endpoint& client, FieldElement x) {
  return share_input_batch(client, {x})[0];
}

std::vector<SharedValue> MpcEngine::share_input_batch(const Endpoint& client,
                                                      const std::vector<FieldElement>& xs) {
  const std::size_t k = xs.size();
  if (input_cursor_ + k > input_masks_.size()) throw MaskExhaustedError();
  const std::size_t base = input_cursor_;
  input_cursor_ += k;

  std::vector<FieldElement> deltas(k);
  for (std::size_t s = 0; s < k; ++s)
    deltas[s] = field_.sub(xs[s], input_masks_[base + s].clear);

  std::vector<SharedValue> out(k, SharedValue((size_t)n_parties_));
  for (int i = 0; i < n_parties_; ++i) {
    std::vector<std::uint8_t> payload;
    payload.reserve(16 * k);
    for (std::size_t s = 0; s < k; ++s) {
      FieldElement vs = input_masks_[base + s].value_shares[(size_t)i];
      if (i == 0) vs = field_.add(vs, deltas[s]);
      put_fe(payload, vs);
      put_fe(payload, deltas[s]);
    }
    const auto& delivered = net_.send(client, party_endpoint(i), std::move(payload));
    if (delivered.size() != 16 * k) throw ProtocolError("mpc: malformed input message");
    PartyState& p = parties_[(size_t)i];
    for (std::size_t s = 0; s < k; ++s) {
      FieldElement vs = field_.from_bytes(&delivered[16 * s]);
      FieldElement d = field_.from_bytes(&delivered[16 * s + 8]);
      FieldElement mac = field_.add(p.input_mask_macs[base + s], field_.mul(d, p.alpha_share));
      out[s][(size_t)i] = {vs, mac, i};
    }
    net_.inbox(party_endpoint(i)).pop_back();
  }
  return out;
}

SharedValue MpcEngine::constant_share(FieldElement c) const {
  SharedValue out((size_t)n_parties_);
  for (int i = 0; i < n_parties_; ++i) {
    FieldElement value = i == 0 ? c : field_.zero();
    out[(size_t)i] = {value, field_.mul(c, parties_[(size_t)i].alpha_share), i};
  }
  return out;
}

SharedValue MpcEngine::add(const SharedValue& x, const SharedValue& y) const {
  SharedValue out((size_t)n_parties_);
  for (int i = 0; i < n_parties_; ++i)
    out[(size_t)i] = add_shares(field_, x[(size_t)i], y[(size_t)i]);
  return out;
}

SharedValue MpcEngine::sub(const SharedValue& x, const SharedValue& y) const {
  SharedValue out((size_t)n_parties_);
  for (int i = 0; i < n_parties_; ++i)
    out[(size_t)i] = sub_shares(field_, x[(size_t)i], y[(size_t)i]);
  return out;
}

SharedValue MpcEngine::mul_public(const SharedValue& x, FieldElement k) const {
  SharedValue out((size_t)n_parties_);
  for (int i = 0; i < n_parties_; ++i)
    out[(size_t)i] = secmeter::mul_public(field_, x[(size_t)i], k);
  return out;
}

SharedValue MpcEngine::add_public(const SharedValue& x, FieldElement k) const {
  SharedValue out((size_t)n_parties_);
  for (int i = 0; i < n_parties_; ++i)
    out[(size_t)i] =
        secmeter::add_public(field_, x[(size_t)i], k, parties_[(size_t)i].alpha_share);
  return out;
}

std::size_t MpcEngine::take_triple_index() {
  while (triple_cursor_ < triple_used_.size() && triple_used_[triple_cursor_]) ++triple_cursor_;
  if (triple_cursor_ >= triple_used_.size()) throw ProtocolError("mpc: beaver triples exhausted");
  return triple_cursor_++;
}

std::size_t MpcEngine::triples_remaining() const {
  std::size_t n = 0;
  for (bool used : triple_used_)
    if (!used) ++n;
  return n;
}

SharedValue MpcEngine::beaver_mul(const SharedValue& x, const SharedValue& y,
                                  std::size_t triple_index) {
  if (triple_index >= triple_used_.size() || triple_used_[triple_index])
    throw TripleReuseError();
  triple_used_[triple_index] = true;
  open_kind_counts_[(size_t)OpenKind::BeaverMask] += 2;

  net_.begin_round();
  const Field f = field_;
  std::vector<SimNetwork::Outbox> outboxes((size_t)n_parties_);
  auto micros = run_party_round(mode_, n_parties_, [&](int i) {
    const PartyState& p = parties_[(size_t)i];
    const TripleShare& t = p.triples[triple_index];
    std::vector<std::uint8_t> payload;
    put_fe(payload, f.sub(x[(size_t)i].value, t.a.value));
    put_fe(payload, f.sub(y[(size_t)i].value, t.b.value));
    for (int j = 0; j < n_parties_; ++j)
      if (j != i) outboxes[(size_t)i].push_back({party_endpoint(i), party_endpoint(j), 0, payload});
  });
  record_cpu(micros);
  net_.deliver_outboxes(outboxes);

  SharedValue out((size_t)n_parties_);
  micros = run_party_round(mode_, n_parties_, [&](int i) {
    PartyState& p = parties_[(size_t)i];
    const TripleShare& t = p.triples[triple_index];
    FieldElement eps = f.sub(x[(size_t)i].value, t.a.value);
    FieldElement del = f.sub(y[(size_t)i].value, t.b.value);
    auto& in = net_.inbox(party_endpoint(i));
    if (in.size() != (size_t)(n_parties_ - 1)) throw ProtocolError("mpc: beaver inbox mismatch");
    for (auto& msg : in) {
      if (msg.payload.size() != 16) throw ProtocolError("mpc: malformed beaver message");
      eps = f.add(eps, f.from_bytes(msg.payload.data()));
      del = f.add(del, f.from_bytes(msg.payload.data() + 8));
    }
    in.clear();
    p.transcript.push_back(
        {eps, f.sub(x[(size_t)i].mac, t.a.mac), OpenKind::BeaverMask});
    p.transcript.push_back(
        {del, f.sub(y[(size_t)i].mac, t.b.mac), OpenKind::BeaverMask});
    AuthShare z = add_shares(f, t.c, secmeter::mul_public(f, t.b, eps));
    z = add_shares(f, z, secmeter::mul_public(f, t.a, del));
    z = secmeter::add_public(f, z, f.mul(eps, del), p.alpha_share);
    out[(size_t)i] = z;
  });
  record_cpu(micros);
  return out;
}

std::vector<SharedValue> MpcEngine::beaver_mul_batch(const std::vector<SharedValue>& xs,
                                                     const std::vector<SharedValue>& ys) {
  if (xs.size() != ys.size()) throw ProtocolError("mpc: beaver batch size mismatch");
  const std::size_t k = xs.size();
  if (k == 0) return {};
  std::vector<std::size_t> indices(k);
  for (std::size_t s = 0; s < k; ++s) indices[s] = take_triple_index();
  for (std::size_t s = 0; s < k; ++s) triple_used_[indices[s]] = true;
  open_kind_counts_[(size_t)OpenKind::BeaverMask] += 2 * k;

  net_.begin_round();
  const Field f = field_;
  std::vector<SimNetwork::Outbox> outboxes((size_t)n_parties_);
  auto micros = run_party_round(mode_, n_parties_, [&](int i) {
    const PartyState& p = parties_[(size_t)i];
    std::vector<std::uint8_t> payload;
    payload.reserve(16 * k);
    for (std::size_t s = 0; s < k; ++s) {
      const TripleShare& t = p.triples[indices[s]];
      put_fe(payload, f.sub(xs[s][(size_t)i].value, t.a.value));
      put_fe(payload, f.sub(ys[s][(size_t)i].value, t.b.value));
    }
    for (int j = 0; j < n_parties_; ++j)
      if (j != i) outboxes[(size_t)i].push_back({party_endpoint(i), party_endpoint(j), 0, payload});
  });
  record_cpu(micros);
  net_.deliver_outboxes(outboxes);

  std::vector<SharedValue> out(k, SharedValue((size_t)n_parties_));
  micros = run_party_round(mode_, n_parties_, [&](int i) {
    PartyState& p = parties_[(size_t)i];
    auto& in = net_.inbox(party_endpoint(i));
    if (in.size() != (size_t)(n_parties_ - 1)) throw ProtocolError("mpc: beaver inbox mismatch");
    for (std::size_t s = 0; s < k; ++s) {
      const TripleShare& t = p.triples[indices[s]];
      FieldElement eps = f.sub(xs[s][(size_t)i].value, t.a.value);
      FieldElement del = f.sub(ys[s][(size_t)i].value, t.b.value);
      for (auto& msg : in) {
        if (msg.payload.size() != 16 * k) throw ProtocolError("mpc: malformed beaver message");
        eps = f.add(eps, f.from_bytes(&msg.payload[16 * s]));
        del = f.add(del, f.from_bytes(&msg.payload[16 * s + 8]));
      }
      p.transcript.push_back({eps, f.sub(xs[s][(size_t)i].mac, t.a.mac), OpenKind::BeaverMask});
      p.transcript.push_back({del, f.sub(ys[s][(size_t)i].mac, t.b.mac), OpenKind::BeaverMask});
      AuthShare z = add_shares(f, t.c, secmeter::mul_public(f, t.b, eps));
      z = add_shares(f, z, secmeter::mul_public(f, t.a, del));
      z = secmeter::add_public(f, z, f.mul(eps, del), p.alpha_share);
      out[s][(size_t)i] = z;
    }
    in.clear();
  });
  record_cpu(micros);
  return out;
}

FieldElement MpcEngine::open(const SharedValue& x, OpenKind kind) {
  return open_batch({x}, kind)[0];
}

std::vector<FieldElement> MpcEngine::open_batch(const std::vector<SharedValue>& xs,
                                                OpenKind kind) {
  auto views = open_batch_views(xs, kind);
  return views[0];
}

std::vector<std::vector<FieldElement>> MpcEngine::open_batch_views(
    const std::vector<SharedValue>& xs, OpenKind kind) {
  const std::size_t k = xs.size();
  if (k == 0) return std::vector<std::vector<FieldElement>>((size_t)n_parties_);
  open_kind_counts_[(size_t)kind] += k;

  net_.begin_round();
  const Field f = field_;
  std::vector<SimNetwork::Outbox> outboxes((size_t)n_parties_);
  auto micros = run_party_round(mode_, n_parties_, [&](int i) {
    std::vector<std::uint8_t> payload;
    payload.reserve(8 * k);
    for (std::size_t s = 0; s < k; ++s) put_fe(payload, xs[s][(size_t)i].value);
    for (int j = 0; j < n_parties_; ++j)
      if (j != i) outboxes[(size_t)i].push_back({party_endpoint(i), party_endpoint(j), 0, payload});
  });
  record_cpu(micros);
  net_.deliver_outboxes(outboxes);

  std::vector<std::vector<FieldElement>> views((size_t)n_parties_,
                                               std::vector<FieldElement>(k));
  micros = run_party_round(mode_, n_parties_, [&](int i) {
    PartyState& p = parties_[(size_t)i];
    auto& in = net_.inbox(party_endpoint(i));
    if (in.size() != (size_t)(n_parties_ - 1)) throw ProtocolError("mpc: open inbox mismatch");
    for (std::size_t s = 0; s < k; ++s) {
      FieldElement v = xs[s][(size_t)i].value;
      for (auto& msg : in) {
        if (msg.payload.size() != 8 * k) throw ProtocolError("mpc: malformed open message");
        v = f.add(v, f.from_bytes(&msg.payload[8 * s]));
      }
      views[(size_t)i][s] = v;
      p.transcript.push_back({v, xs[s][(size_t)i].mac, kind});
    }
    in.clear();
  });
  record_cpu(micros);
  return views;
}

bool MpcEngine::transcript_empty() const { return parties_[0].transcript.empty(); }

std::size_t MpcEngine::transcript_size() const { return parties_[0].transcript.size(); }

MacCheckResult MpcEngine::check_macs() {
  if (transcript_empty()) throw EmptyTranscriptError();
  const Field f = field_;
  Phase prev_phase = net_.phase();
  net_.set_phase(Phase::MacCheck);

  struct Temp {
    FieldElement sigma;
    std::uint64_t nonce = 0;
    std::vector<std::array<std::uint8_t, 32>> commits;  // by producer, self slot unused
    bool ok = true;
  };
  std::vector<Temp> temp((size_t)n_parties_);
  for (auto& t : temp) t.commits.resize((size_t)n_parties_);

  // Commit round: sigma_i = sum chi_k*mac_k - alpha_i * sum chi_k*v_k, with
  // chi derived from a hash of this party's view of all opened values.
  net_.begin_round();
  std::vector<SimNetwork::Outbox> outboxes((size_t)n_parties_);
  auto micros = run_party_round(mode_, n_parties_, [&](int i) {
    PartyState& p = parties_[(size_t)i];
    std::vector<std::uint8_t> seed_input;
    seed_input.reserve(8 + 8 * p.transcript.size());
    put_u64(seed_input, p.transcript.size());
    for (auto& rec : p.transcript) put_fe(seed_input, rec.value);
    auto digest = sha256(seed_input.data(), seed_input.size());
    FieldRng chi_rng(get_u64(digest.data()));
    FieldElement mac_sum = f.zero();
    FieldElement val_sum = f.zero();
    for (auto& rec : p.transcript) {
      FieldElement chi = chi_rng.next_nonzero(f);
      mac_sum = f.add(mac_sum, f.mul(chi, rec.mac_share));
      val_sum = f.add(val_sum, f.mul(chi, rec.value));
    }
    Temp& t = temp[(size_t)i];
    t.sigma = f.sub(mac_sum, f.mul(p.alpha_share, val_sum));
    t.nonce = splitmix64(p.nonce_seed + p.nonce_counter++);
    std::array<std::uint8_t, 16> body{};
    auto sb = Field::to_bytes(t.sigma);
    std::copy(sb.begin(), sb.end(), body.begin());
    for (int b = 0; b < 8; ++b) body[(size_t)(8 + b)] = (std::uint8_t)(t.nonce >> (8 * b));
    auto commit = sha256(body.data(), body.size());
    std::vector<std::uint8_t> payload(commit.begin(), commit.end());
    for (int j = 0; j < n_parties_; ++j)
      if (j != i) outboxes[(size_t)i].push_back({party_endpoint(i), party_endpoint(j), 0, payload});
  });
  record_cpu(micros);
  net_.deliver_outboxes(outboxes);

  // Absorb commits, then reveal (sigma, nonce).
  net_.begin_round();
  micros = run_party_round(mode_, n_parties_, [&](int i) {
    auto& in = net_.inbox(party_endpoint(i));
    if (in.size() != (size_t)(n_parties_ - 1)) throw ProtocolError("mpc: commit inbox mismatch");
    std::size_t idx = 0;
    for (int j = 0; j < n_parties_; ++j) {
      if (j == i) continue;
      auto& msg = in[idx++];
      if (msg.payload.size() != 32) throw ProtocolError("mpc: malformed commit message");
      std::copy(msg.payload.begin(), msg.payload.end(), temp[(size_t)i].commits[(size_t)j].begin());
    }
    in.clear();
    std::vector<std::uint8_t> payload;
    put_fe(payload, temp[(size_t)i].sigma);
    put_u64(payload, temp[(size_t)i].nonce);
    for (int j = 0; j < n_parties_; ++j)
      if (j != i) outboxes[(size_t)i].push_back({party_endpoint(i), party_endpoint(j), 0, payload});
  });
  record_cpu(micros);
  net_.deliver_outboxes(outboxes);

  // Verify reveals against commits and sum the differences.
  micros = run_party_round(mode_, n_parties_, [&](int i) {
    Temp& t = temp[(size_t)i];
    auto& in = net_.inbox(party_endpoint(i));
    if (in.size() != (size_t)(n_parties_ - 1)) throw ProtocolError("mpc: reveal inbox mismatch");
    FieldElement total = t.sigma;
    std::size_t idx = 0;
    for (int j = 0; j < n_parties_; ++j) {
      if (j == i) continue;
      auto& msg = in[idx++];
      if (msg.payload.size() != 16) throw ProtocolError("mpc: malformed reveal message");
      auto expect = sha256(msg.payload.data(), msg.payload.size());
      if (expect != t.commits[(size_t)j]) t.ok = false;
      total = f.add(total, f.from_bytes(msg.payload.data()));
    }
    in.clear();
    if (total.v != 0) t.ok = false;
  });
  record_cpu(micros);

  for (auto& p : parties_) p.transcript.clear();
  net_.set_phase(prev_phase);
  for (auto& t : temp)
    if (!t.ok) return MacCheckResult::Fail;
  return MacCheckResult::Pass;
}

std::vector<std::vector<FieldElement>> MpcEngine::open_masked_batch(
    const std::vector<SharedValue>& xs, const std::vector<std::size_t>& slots) {
  if (xs.size() != slots.size()) throw ProtocolError("mpc: masked batch size mismatch");
  std::vector<SharedValue> masked(xs.size());
  for (std::size_t s = 0; s < xs.size(); ++s) {
    std::size_t slot = slots[s];
    if (slot >= output_used_.size()) throw ProtocolError("mpc: output mask slot out of range");
    if (output_used_[slot]) throw ProtocolError("mpc: output mask already consumed");
    output_used_[slot] = true;
    masked[s].resize((size_t)n_parties_);
    for (int i = 0; i < n_parties_; ++i)
      masked[s][(size_t)i] =
          add_shares(field_, xs[s][(size_t)i], parties_[(size_t)i].output_masks[slot]);
  }
  return open_batch_views(masked, OpenKind::MaskedOutput);
}

std::vector<MaskedOutputDelivery> MpcEngine::deliver_masked_outputs(
    const std::vector<std::vector<FieldElement>>& views,
    const std::vector<std::vector<Endpoint>>& receivers_per_item) {
  const std::size_t k = receivers_per_item.size();
  std::vector<MaskedOutputDelivery> out(k);
  if (k == 0) return out;

  // Canonical receiver set, items per receiver in ascending item order.
  std::map<Endpoint, std::vector<std::size_t>> items_of;
  for (std::size_t s = 0; s < k; ++s)
    for (const auto& r : receivers_per_item[s]) items_of[r].push_back(s);
  for (auto& [r, items] : items_of) net_.register_endpoint(r);

  net_.begin_round();
  std::vector<SimNetwork::Outbox> outboxes((size_t)n_parties_);
  auto micros = run_party_round(mode_, n_parties_, [&](int i) {
    for (auto& [r, items] : items_of) {
      std::vector<std::uint8_t> payload;
      payload.reserve(8 * items.size());
      for (std::size_t s : items) put_fe(payload, views[(size_t)i][s]);
      outboxes[(size_t)i].push_back({party_endpoint(i), r, 0, std::move(payload)});
    }
  });
  record_cpu(micros);
  net_.deliver_outboxes(outboxes);

  // Receiver side: all copies must be byte-identical.
  for (std::size_t s = 0; s < k; ++s) out[s] = {true, views[0][s]};
  for (auto& [r, items] : items_of) {
    auto& in = net_.inbox(r);
    if (in.size() != (size_t)n_parties_) throw ProtocolError("mpc: delivery inbox mismatch");
    for (std::size_t idx = 0; idx < items.size(); ++idx) {
      const std::size_t item = items[idx];
      FieldElement first = field_.from_bytes(&in[0].payload[8 * idx]);
      for (int i = 1; i < n_parties_; ++i) {
        FieldElement v = field_.from_bytes(&in[(size_t)i].payload[8 * idx]);
        if (!(v == first)) out[item].consistent = false;
      }
      out[item].masked = first;
    }
    in.clear();
  }
  return out;
}

FieldElement MpcEngine::output_mask_clear(std::size_t slot) const {
  if (slot >= output_mask_clear_.size())
    throw ProtocolError("mpc: output mask slot out of range");
  return output_mask_clear_[slot];
}

std::size_t MpcEngine::output_masks_remaining() const {
  std::size_t n = 0;
  for (bool used : output_used_)
    if (!used) ++n;
  return n;
}

std::size_t MpcEngine::take_output_slot() {
  while (output_cursor_ < output_used_.size() && output_used_[output_cursor_]) ++output_cursor_;
  if (output_cursor_ >= output_used_.size())
    throw ProtocolError("mpc: output masks exhausted");
  return output_cursor_++;
}

void MpcEngine::record_cpu(const std::vector<std::uint64_t>& micros) {
  if (!timing_) return;
  for (int i = 0; i < n_parties_; ++i)
    net_.add_cpu(party_endpoint(i), net_.phase(), micros[(size_t)i]);
}

}  // namespace secmeter
