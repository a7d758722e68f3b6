#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <map>

#include "secmeter/mpc.hpp"

using namespace secmeter;

namespace {

struct Rig {
  Field field;
  DealerMaterial material;
  SimNetwork net;
  MpcEngine engine;

  Rig(const Field& f, DealCounts counts, int n_parties, std::uint64_t seed,
      ExecMode mode = ExecMode::Sequential)
      : field(f),
        material(offline_deal(f, counts, n_parties, seed)),
        net(f),
        engine(material, net, mode) {}
};

const Endpoint kClient{Role::Client, 0};

}  // namespace

TEST_CASE("empty deal still carries valid key shares") {
  Field f;
  auto m = offline_deal(f, {0, 0, 0}, 3, 99);
  CHECK(m.triples.empty());
  CHECK(m.input_masks.empty());
  FieldElement alpha = f.zero();
  for (auto& s : m.alpha_shares) alpha = f.add(alpha, s);
  CHECK(alpha == m.alpha);
}

TEST_CASE("dealt triples satisfy c = a*b and the MAC-sum invariant") {
  Field f;
  auto m = offline_deal(f, {8, 8, 4}, 3, 7);
  for (auto& t : m.triples) {
    std::vector<AuthShare> as, bs, cs;
    for (auto& p : t) {
      as.push_back(p.a);
      bs.push_back(p.b);
      cs.push_back(p.c);
    }
    FieldElement a = reconstruct_value(f, as);
    FieldElement b = reconstruct_value(f, bs);
    CHECK(reconstruct_value(f, cs) == f.mul(a, b));
    // MAC sums equal alpha * value on every component
    CHECK(reconstruct_mac(f, as) == f.mul(m.alpha, a));
    CHECK(reconstruct_mac(f, bs) == f.mul(m.alpha, b));
    CHECK(reconstruct_mac(f, cs) == f.mul(m.alpha, f.mul(a, b)));
  }
  for (std::size_t s = 0; s < m.input_masks.size(); ++s) {
    FieldElement r = f.zero();
    for (auto& v : m.input_masks[s].value_shares) r = f.add(r, v);
    CHECK(r == m.input_masks[s].clear);
    FieldElement mac = f.zero();
    for (auto& v : m.input_mask_macs[s]) mac = f.add(mac, v);
    CHECK(mac == f.mul(m.alpha, r));
  }
  for (std::size_t s = 0; s < m.output_masks.size(); ++s) {
    CHECK(reconstruct_value(f, m.output_masks[s]) == m.output_mask_clear[s]);
    CHECK(reconstruct_mac(f, m.output_masks[s]) ==
          f.mul(m.alpha, m.output_mask_clear[s]));
  }
}

TEST_CASE("share_input reconstructs and is deterministic per seed") {
  Field f;
  Rig r1(f, {4, 0, 0}, 3, 1234);
  r1.net.begin_round();
  auto zero = r1.engine.share_input(kClient, f.zero());
  CHECK(reconstruct_value(f, zero).v == 0);
  auto s42 = r1.engine.share_input(kClient, {42});
  CHECK(reconstruct_value(f, s42).v == 42);
  CHECK(reconstruct_mac(f, s42) == f.mul(r1.material.alpha, {42}));

  Rig r2(f, {4, 0, 0}, 3, 1234);
  r2.net.begin_round();
  auto zero2 = r2.engine.share_input(kClient, f.zero());
  auto s42b = r2.engine.share_input(kClient, {42});
  CHECK(s42 == s42b);
  CHECK(zero == zero2);

  r1.engine.share_input(kClient, {7});
  r1.engine.share_input(kClient, {8});
  CHECK_THROWS_AS(r1.engine.share_input(kClient, {9}), MaskExhaustedError);
}

TEST_CASE("local linear layer") {
  Field f;
  Rig rig(f, {8, 0, 0}, 3, 5);
  auto& e = rig.engine;
  rig.net.begin_round();
  auto x = e.share_input(kClient, {3});
  auto y = e.share_input(kClient, {4});
  auto zero = e.share_input(kClient, f.zero());

  auto sum = e.add(x, zero);
  CHECK(reconstruct_value(f, sum).v == 3);
  sum = e.add(x, y);
  CHECK(reconstruct_value(f, sum).v == 7);
  CHECK(reconstruct_mac(f, sum) == f.mul(rig.material.alpha, {7}));

  CHECK(reconstruct_value(f, e.mul_public(x, f.one())).v == 3);
  CHECK(reconstruct_value(f, e.mul_public(x, f.zero())).v == 0);
  for (auto& s : e.mul_public(x, f.zero())) CHECK(s.value.v == 0);

  FieldRng rng(17);
  for (int i = 0; i < 50; ++i) {
    FieldElement k = rng.next(f);
    auto scaled = e.mul_public(y, k);
    CHECK(reconstruct_value(f, scaled) == f.mul({4}, k));
    CHECK(reconstruct_mac(f, scaled) == f.mul(rig.material.alpha, f.mul({4}, k)));
    auto shifted = e.add_public(y, k);
    CHECK(reconstruct_value(f, shifted) == f.add({4}, k));
    CHECK(reconstruct_mac(f, shifted) == f.mul(rig.material.alpha, f.add({4}, k)));
  }

  AuthShare a = x[0], b = x[1];
  CHECK_THROWS_AS(add_shares(f, a, b), OwnerMismatchError);
}

TEST_CASE("beaver multiplication") {
  Field f;
  Rig rig(f, {8, 8, 0}, 3, 23);
  auto& e = rig.engine;
  rig.net.begin_round();
  auto x = e.share_input(kClient, {6});
  auto y = e.share_input(kClient, {7});
  auto zero = e.share_input(kClient, f.zero());

  auto prod = e.beaver_mul(x, y, 0);
  CHECK(reconstruct_value(f, prod).v == 42);
  CHECK(reconstruct_mac(f, prod) == f.mul(rig.material.alpha, {42}));
  CHECK(e.transcript_size() == 2);  // exactly two openings recorded

  auto zprod = e.beaver_mul(zero, y, 1);
  CHECK(reconstruct_value(f, zprod).v == 0);

  CHECK_THROWS_AS(e.beaver_mul(x, y, 0), TripleReuseError);
  CHECK(e.check_macs() == MacCheckResult::Pass);
}

TEST_CASE("beaver on fixed-point encodings carries scale squared") {
  Field f;
  FixedPointCodec codec(f, 1000);
  Rig rig(f, {4, 1, 0}, 3, 31);
  auto& e = rig.engine;
  rig.net.begin_round();
  auto x = e.share_input(kClient, codec.encode(1.5));
  auto y = e.share_input(kClient, codec.encode(2.0));
  auto prod = e.beaver_mul(x, y, 0);
  std::int64_t scaled2 = codec.decode_scaled(reconstruct_value(f, prod));
  CHECK(scaled2 == 3000000);  // 1500 * 2000
  CHECK((double)scaled2 / (1000.0 * 1000.0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(e.check_macs() == MacCheckResult::Pass);
}

TEST_CASE("beaver communication is exactly 16 bytes per product per destination") {
  Field f;
  Rig rig(f, {4, 2, 0}, 3, 77);
  auto& e = rig.engine;
  rig.net.begin_round();
  auto x = e.share_input(kClient, {5});
  auto y = e.share_input(kClient, {9});

  auto sent_before = [&](int i) {
    return rig.net.stats().at(e.party_endpoint(i), Phase::Offline).bytes_sent +
           rig.net.stats().at(e.party_endpoint(i), Phase::Online).bytes_sent;
  };
  std::vector<std::uint64_t> before(3);
  for (int i = 0; i < 3; ++i) before[(size_t)i] = sent_before(i);
  e.beaver_mul(x, y, 0);
  for (int i = 0; i < 3; ++i) CHECK(sent_before(i) - before[(size_t)i] == 16 * 2);

  for (int i = 0; i < 3; ++i) before[(size_t)i] = sent_before(i);
  e.open(x, OpenKind::Aggregate);
  for (int i = 0; i < 3; ++i) CHECK(sent_before(i) - before[(size_t)i] == 8 * 2);
  CHECK(e.check_macs() == MacCheckResult::Pass);
}

TEST_CASE("open returns the sum of value shares") {
  Field f;
  Rig rig(f, {2, 0, 0}, 4, 3);
  rig.net.begin_round();
  auto x = rig.engine.share_input(kClient, {123456});
  CHECK(rig.engine.open(x, OpenKind::Aggregate).v == 123456);
  CHECK(rig.engine.check_macs() == MacCheckResult::Pass);
}

TEST_CASE("check_macs requires a nonempty transcript") {
  Field f;
  Rig rig(f, {1, 0, 0}, 3, 8);
  CHECK_THROWS_AS(rig.engine.check_macs(), EmptyTranscriptError);
}

TEST_CASE("exhaustive tamper detection at toy modulus 251") {
  Field f(251);
  int detected = 0;
  for (std::uint64_t e = 1; e < 251; ++e) {
    Rig rig(f, {1, 0, 0}, 3, 4242);
    rig.net.begin_round();
    auto x = rig.engine.share_input(kClient, {17 % 251});
    // perturb one party's value share before the opening
    SharedValue tampered = x;
    tampered[1].value = f.add(tampered[1].value, {e});
    rig.engine.open(tampered, OpenKind::Aggregate);
    if (rig.engine.check_macs() == MacCheckResult::Fail) ++detected;
  }
  CHECK(detected >= 249);
}

TEST_CASE("reconstruction matches a plaintext evaluator on random circuits") {
  Field f;
  std::mt19937_64 gen(2024);
  for (int circuit = 0; circuit < 1000; ++circuit) {
    Rig rig(f, {4, 8, 0}, 3, gen());
    auto& e = rig.engine;
    rig.net.begin_round();
    std::vector<SharedValue> shared;
    std::vector<FieldElement> plain;
    FieldRng vals(gen());
    for (int i = 0; i < 4; ++i) {
      FieldElement v = vals.next(f);
      shared.push_back(e.share_input(kClient, v));
      plain.push_back(v);
    }
    int depth = 1 + (int)(gen() % 5);
    for (int d = 0; d < depth; ++d) {
      std::size_t a = gen() % shared.size();
      std::size_t b = gen() % shared.size();
      switch (gen() % 4) {
        case 0:
          shared.push_back(e.add(shared[a], shared[b]));
          plain.push_back(f.add(plain[a], plain[b]));
          break;
        case 1: {
          FieldElement k = vals.next(f);
          shared.push_back(e.mul_public(shared[a], k));
          plain.push_back(f.mul(plain[a], k));
          break;
        }
        case 2: {
          FieldElement k = vals.next(f);
          shared.push_back(e.add_public(shared[a], k));
          plain.push_back(f.add(plain[a], k));
          break;
        }
        default:
          shared.push_back(e.beaver_mul(shared[a], shared[b], e.take_triple_index()));
          plain.push_back(f.mul(plain[a], plain[b]));
          break;
      }
    }
    for (std::size_t i = 0; i < shared.size(); ++i)
      CHECK(reconstruct_value(f, shared[i]) == plain[i]);
    if (!e.transcript_empty()) CHECK(e.check_macs() == MacCheckResult::Pass);
  }
}

TEST_CASE("single-party view of fresh sharings is uniform at toy modulus") {
  Field f(251);
  const int kSamples = 10000;
  auto m = offline_deal(f, (DealCounts){(std::size_t)kSamples, 0, 0}, 3, 555);
  SimNetwork net(f);
  MpcEngine e(m, net, ExecMode::Sequential);
  net.begin_round();
  std::vector<int> bins(251, 0);
  for (int s = 0; s < kSamples; ++s) {
    auto sh = e.share_input(kClient, {42});
    ++bins[(size_t)sh[0].value.v];  // party 0 holds mask share + correction
  }
  double expected = (double)kSamples / 251.0;
  double chi2 = 0.0;
  for (int b : bins) chi2 += ((double)b - expected) * ((double)b - expected) / expected;
  // 0.99 quantile of chi-squared with 250 degrees of freedom
  CHECK(chi2 < 304.9395557339572);
}

TEST_CASE("threaded execution produces byte-identical transcripts") {
  Field f;
  auto run = [&](ExecMode mode) {
    Rig rig(f, {10, 5, 2}, 3, 909, mode);
    auto& e = rig.engine;
    rig.net.set_phase(Phase::Online);
    rig.net.begin_round();
    std::vector<SharedValue> xs, ys;
    for (int i = 0; i < 5; ++i) {
      xs.push_back(e.share_input(kClient, {(std::uint64_t)(100 + i)}));
      ys.push_back(e.share_input(kClient, {(std::uint64_t)(200 + i)}));
    }
    auto prods = e.beaver_mul_batch(xs, ys);
    auto views = e.open_masked_batch({prods[0], prods[1]}, {0, 1});
    CHECK(e.check_macs() == MacCheckResult::Pass);
    auto delivered = e.deliver_masked_outputs(
        views, {{kClient, {Role::Supplier, 0}}, {kClient, {Role::Supplier, 0}}});
    for (auto& d : delivered) CHECK(d.consistent);
    FieldElement total0 = f.sub(delivered[0].masked, e.output_mask_clear(0));
    CHECK(total0.v == 100 * 200);
    return std::pair{rig.net.transcript_hash(), rig.net.stats().total_sent};
  };
  auto seq = run(ExecMode::Sequential);
  auto thr = run(ExecMode::Threaded);
  CHECK(seq.first == thr.first);
  CHECK(seq.second == thr.second);
}

TEST_CASE("batched beaver matches elementwise products") {
  Field f;
  Rig rig(f, {12, 6, 0}, 3, 1010);
  auto& e = rig.engine;
  rig.net.begin_round();
  std::vector<SharedValue> xs, ys;
  std::vector<FieldElement> px, py;
  FieldRng rng(77);
  for (int i = 0; i < 6; ++i) {
    FieldElement a = rng.next(f), b = rng.next(f);
    xs.push_back(e.share_input(kClient, a));
    ys.push_back(e.share_input(kClient, b));
    px.push_back(a);
    py.push_back(b);
  }
  auto prods = e.beaver_mul_batch(xs, ys);
  for (int i = 0; i < 6; ++i)
    CHECK(reconstruct_value(f, prods[(size_t)i]) == f.mul(px[(size_t)i], py[(size_t)i]));
  CHECK(e.transcript_size() == 12);
  CHECK(e.check_macs() == MacCheckResult::Pass);
  CHECK(e.triples_remaining() == 0);
}

TEST_CASE("dealer material file round trip") {
  Field f;
  auto m = offline_deal(f, {3, 2, 1}, 3, 31337);
  std::string p1 = "material_a.bin", p2 = "material_b.bin";
  save_dealer_material(p1, m);
  auto loaded = load_dealer_material(p1);
  CHECK(loaded.n_parties == m.n_parties);
  CHECK(loaded.field.modulus() == m.field.modulus());
  CHECK(loaded.alpha == m.alpha);
  save_dealer_material(p2, loaded);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(s1.size() > 0);
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("material file rejects bad magic") {
  std::string path = "bad_material.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE but long enough to hold a header";
  }
  CHECK_THROWS_AS(load_dealer_material(path), MaterialFormatError);
  std::remove(path.c_str());
}
