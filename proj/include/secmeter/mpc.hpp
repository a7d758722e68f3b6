#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "secmeter/field.hpp"
#include "secmeter/net.hpp"

namespace secmeter {

using PartyId = int;

struct MaskExhaustedError : std::runtime_error {
  MaskExhaustedError() : std::runtime_error("mpc: input mask slots exhausted") {}
};
struct OwnerMismatchError : std::runtime_error {
  OwnerMismatchError() : std::runtime_error("mpc: shares owned by different parties") {}
};
struct TripleReuseError : std::runtime_error {
  TripleReuseError() : std::runtime_error("mpc: beaver triple already consumed") {}
};
struct EmptyTranscriptError : std::runtime_error {
  EmptyTranscriptError() : std::runtime_error("mpc: mac check requires at least one opening") {}
};
struct MaterialFormatError : std::runtime_error {
  explicit MaterialFormatError(const std::string& what) : std::runtime_error(what) {}
};
struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

struct MacKeyShare {
  FieldElement alpha_share;
};

// One party's additive share of a value plus its share of alpha*value.
struct AuthShare {
  FieldElement value;
  FieldElement mac;
  PartyId owner = 0;
  friend bool operator==(const AuthShare&, const AuthShare&) = default;
};

// Local linear layer; all of these are communication-free.
AuthShare add_shares(const Field& f, const AuthShare& a, const AuthShare& b);
AuthShare sub_shares(const Field& f, const AuthShare& a, const AuthShare& b);
AuthShare mul_public(const Field& f, const AuthShare& a, FieldElement k);
// Party 0 adjusts the value share; every party adjusts its MAC share by k*alpha_share.
AuthShare add_public(const Field& f, const AuthShare& a, FieldElement k, FieldElement alpha_share);

struct TripleShare {
  AuthShare a, b, c;
};

// The client-held half of an input mask: the clear mask value and every
// party's value share of it. The parties hold only the per-slot MAC shares.
struct ClientInputMask {
  FieldElement clear;
  std::vector<FieldElement> value_shares;
};

struct DealCounts {
  std::size_t inputs = 0;
  std::size_t triples = 0;
  std::size_t outputs = 0;
};

struct DealerMaterial {
  Field field{Field::kMersenne61};
  int n_parties = 0;
  std::uint64_t seed = 0;
  FieldElement alpha;  // dealer-side only; never enters party state
  std::vector<FieldElement> alpha_shares;
  std::vector<std::vector<TripleShare>> triples;            // [slot][party]
  std::vector<ClientInputMask> input_masks;                 // [slot]
  std::vector<std::vector<FieldElement>> input_mask_macs;   // [slot][party]
  std::vector<FieldElement> output_mask_clear;              // [slot]
  std::vector<std::vector<AuthShare>> output_masks;         // [slot][party]
};

// Trusted-dealer offline phase: input-independent preprocessing from a
// seeded PRNG. Every dealt sharing satisfies the share-sum and MAC-sum
// invariants by construction.
DealerMaterial offline_deal(const Field& f, const DealCounts& counts, int n_parties,
                            std::uint64_t seed);

// Versioned binary dealer-material file ("SPDZ" magic).
void save_dealer_material(const std::string& path, const DealerMaterial& m);
DealerMaterial load_dealer_material(const std::string& path);

// Dealer-side reconstruction, for tests and invariant checks.
FieldElement reconstruct_value(const Field& f, const std::vector<AuthShare>& shares);
FieldElement reconstruct_mac(const Field& f, const std::vector<AuthShare>& shares);

// A secret value as held by the runtime: one AuthShare per party.
using SharedValue = std::vector<AuthShare>;

enum class OpenKind { BeaverMask, Aggregate, MaskedOutput };

struct OpenRecord {
  FieldElement value;      // this party's view of the opened value
  FieldElement mac_share;  // retained for the deferred batched check
  OpenKind kind;
};

struct PartyState {
  PartyId id = 0;
  FieldElement alpha_share;
  std::vector<TripleShare> triples;
  std::vector<FieldElement> input_mask_macs;  // [slot]
  std::vector<AuthShare> output_masks;        // [slot]
  std::vector<OpenRecord> transcript;
  std::uint64_t nonce_seed = 0;
  std::uint64_t nonce_counter = 0;
};

enum class MacCheckResult { Pass, Fail };

struct MaskedOutputDelivery {
  bool consistent = false;  // all parties' copies agreed at every receiver
  FieldElement masked;      // opened value of x + r
};

// SPDZ-style online runtime over the simulated network. Owns the party
// states; every cross-party interaction is a network message, so byte and
// round accounting is exact. Party-local steps run through run_party_round
// and may execute on one thread per party; message delivery order is
// canonical either way.
class MpcEngine {
 public:
  MpcEngine(const DealerMaterial& material, SimNetwork& net,
            ExecMode mode = ExecMode::Sequential, bool timing = false);

  const Field& field() const { return field_; }
  int n_parties() const { return n_parties_; }
  Endpoint party_endpoint(int i) const { return {Role::ComputeParty, i}; }
  PartyState& party(int i) { return parties_[(size_t)i]; }
  SimNetwork& net() { return net_; }
  ExecMode exec_mode() const { return mode_; }

  // Client input. Sends one 16-byte message (adjusted value share, mask
  // correction) per party per value; consumes one mask slot per value.
  // The caller controls the round: call net().begin_round() first.
  SharedValue share_input(const Endpoint& client, FieldElement x);
  std::vector<SharedValue> share_input_batch(const Endpoint& client,
                                             const std::vector<FieldElement>& xs);
  std::size_t input_masks_remaining() const;

  // Share of a public constant; no communication, no mask consumed.
  SharedValue constant_share(FieldElement k) const;

  // Local linear ops lifted to SharedValue.
  SharedValue add(const SharedValue& x, const SharedValue& y) const;
  SharedValue sub(const SharedValue& x, const SharedValue& y) const;
  SharedValue mul_public(const SharedValue& x, FieldElement k) const;
  SharedValue add_public(const SharedValue& x, FieldElement k) const;

  // Beaver multiplication; consumes the given triple (errors on reuse) and
  // appends exactly two openings per product to the MAC transcript. One
  // broadcast round: 16 bytes per product per destination party.
  SharedValue beaver_mul(const SharedValue& x, const SharedValue& y, std::size_t triple_index);
  std::vector<SharedValue> beaver_mul_batch(const std::vector<SharedValue>& xs,
                                            const std::vector<SharedValue>& ys);
  std::size_t take_triple_index();
  std::size_t triples_remaining() const;

  // Public opening among parties: 8 bytes per value per destination party.
  // Returns party 0's view; every party records its own view for the check.
  FieldElement open(const SharedValue& x, OpenKind kind);
  std::vector<FieldElement> open_batch(const std::vector<SharedValue>& xs, OpenKind kind);
  // Per-party views, [party][item].
  std::vector<std::vector<FieldElement>> open_batch_views(const std::vector<SharedValue>& xs,
                                                          OpenKind kind);

  bool transcript_empty() const;
  std::size_t transcript_size() const;
  const std::vector<OpenRecord>& transcript_of(int party) const {
    return parties_[(size_t)party].transcript;
  }
  // Lifetime counts of opened values by kind; survives check_macs. Every
  // opening in the protocol is one of these three kinds, which is the
  // auditable statement that no raw reading share is ever opened.
  const std::array<std::size_t, 3>& open_kind_counts() const { return open_kind_counts_; }

  // Batched check over every recorded opening: random linear combination
  // with coefficients from a transcript-derived seed, hash commitments to
  // the per-party differences, then reveal. Clears the transcript.
  MacCheckResult check_macs();

  // Private output: opens x + output_mask[slot] publicly (recorded as a
  // MaskedOutput), then every party sends its view to each receiver, who
  // require all copies identical. Receivers subtract the dealer-given
  // clear mask, available via output_mask_clear().
  std::vector<std::vector<FieldElement>> open_masked_batch(
      const std::vector<SharedValue>& xs, const std::vector<std::size_t>& slots);
  // One delivery round. receivers_per_item[k] lists who learns item k.
  std::vector<MaskedOutputDelivery> deliver_masked_outputs(
      const std::vector<std::vector<FieldElement>>& views,
      const std::vector<std::vector<Endpoint>>& receivers_per_item);
  FieldElement output_mask_clear(std::size_t slot) const;
  std::size_t output_masks_remaining() const;
  std::size_t take_output_slot();

 private:
  void record_cpu(const std::vector<std::uint64_t>& micros);

  Field field_;
  int n_parties_ = 0;
  std::vector<PartyState> parties_;
  std::vector<ClientInputMask> input_masks_;
  std::size_t input_cursor_ = 0;
  std::vector<bool> triple_used_;
  std::size_t triple_cursor_ = 0;
  std::vector<FieldElement> output_mask_clear_;
  std::vector<bool> output_used_;
  std::size_t output_cursor_ = 0;
  std::array<std::size_t, 3> open_kind_counts_{};
  SimNetwork& net_;
  ExecMode mode_;
  bool timing_;
};

}  // namespace secmeter
