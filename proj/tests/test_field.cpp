#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "secmeter/field.hpp"

using namespace secmeter;

namespace {

// Independent wide-integer oracle: plain 128-bit arithmetic, one final remainder.
std::uint64_t oracle_add(std::uint64_t a, std::uint64_t b, std::uint64_t p) {
  return (std::uint64_t)(((unsigned __int128)a + b) % p);
}
std::uint64_t oracle_mul(std::uint64_t a, std::uint64_t b, std::uint64_t p) {
  return (std::uint64_t)((unsigned __int128)a * b % p);
}
std::uint64_t oracle_pow(std::uint64_t a, std::uint64_t e, std::uint64_t p) {
  unsigned __int128 r = 1, base = a % p;
  while (e) {
    if (e & 1) r = r * base % p;
    base = base * base % p;
    e >>= 1;
  }
  return (std::uint64_t)r;
}

constexpr std::uint64_t P = Field::kMersenne61;

}  // namespace

TEST_CASE("addition identities and wraparound") {
  Field f;
  CHECK(f.add({5}, {0}).v == 5);
  CHECK(f.add({P - 1}, {1}).v == 0);
  std::uint64_t big = 2305843009213693950ull;  // p - 1
  CHECK(f.add({big}, {big}).v == oracle_add(big, big, P));
}

TEST_CASE("multiplication identities") {
  Field f;
  CHECK(f.mul({std::uint64_t{1} << 60}, {2}).v == 1);  // 2^61 = p + 1
  FieldRng rng(7);
  for (int i = 0; i < 100; ++i) {
    FieldElement a = rng.next(f);
    CHECK(f.mul(a, f.one()) == a);
  }
  CHECK(f.mul({P - 2}, {P - 2}).v == oracle_mul(P - 2, P - 2, P));
}

TEST_CASE("inverse") {
  Field f;
  CHECK(f.inv({1}).v == 1);
  CHECK(f.inv({2}).v == std::uint64_t{1} << 60);
  CHECK_THROWS_AS(f.inv({0}), ZeroInverseError);
  FieldRng rng(11);
  for (int i = 0; i < 200; ++i) {
    FieldElement a = rng.next(f);
    if (a.v == 0) continue;
    FieldElement ainv = f.inv(a);
    CHECK(f.mul(a, ainv).v == 1);
    CHECK(ainv.v == oracle_pow(a.v, P - 2, P));
  }
}

TEST_CASE("field axioms on random triples vs wide-integer oracle") {
  for (std::uint64_t p : {P, std::uint64_t{251}}) {
    Field f(p);
    FieldRng rng(42);
    for (int i = 0; i < 10000; ++i) {
      FieldElement a = rng.next(f), b = rng.next(f), c = rng.next(f);
      CHECK(f.add(a, b).v == oracle_add(a.v, b.v, p));
      CHECK(f.mul(a, b).v == oracle_mul(a.v, b.v, p));
      CHECK(f.add(f.add(a, b), c) == f.add(a, f.add(b, c)));
      CHECK(f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c)));
      CHECK(f.add(a, b) == f.add(b, a));
      CHECK(f.mul(a, b) == f.mul(b, a));
      CHECK(f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c)));
      CHECK(f.sub(f.add(a, b), b) == a);
    }
  }
}

TEST_CASE("signed lift round trip") {
  Field f;
  for (std::int64_t x : {std::int64_t{0}, std::int64_t{1}, std::int64_t{-1}, std::int64_t{123456789},
                         std::int64_t{-987654321}, (std::int64_t{1} << 59), -(std::int64_t{1} << 59)}) {
    CHECK(f.to_signed(f.from_signed(x)) == x);
  }
}

TEST_CASE("fixed-point encoding") {
  FixedPointCodec codec{Field{}, 1000};
  CHECK(codec.encode(1.234).v == 1234);
  CHECK(codec.encode(0.0).v == 0);
  CHECK(codec.encode(-0.5).v == P - 500);
  CHECK(codec.decode({1234}) == doctest::Approx(1.234));
  CHECK(codec.decode({P - 500}) == doctest::Approx(-0.5));

  // round-half-away-from-zero at the encoding boundary
  CHECK(codec.encode(0.0005).v == 1);
  CHECK(codec.encode(-0.0005).v == P - 1);

  CHECK_THROWS_AS(codec.encode(2e15), RangeOverflowError);
  CHECK_THROWS_AS(codec.encode(-2e15), RangeOverflowError);
}

TEST_CASE("encode/decode round trip over representable range") {
  FixedPointCodec codec{Field{}, 1000};
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<std::int64_t> dist(-1000000000, 1000000000);
  for (int i = 0; i < 10000; ++i) {
    std::int64_t scaled = dist(gen);
    double x = (double)scaled / 1000.0;
    FieldElement e = codec.encode(x);
    CHECK(codec.decode_scaled(e) == scaled);
    CHECK(codec.encode(codec.decode(e)) == e);
  }
}

TEST_CASE("serialization is 8 bytes little-endian and round trips") {
  Field f;
  auto b = Field::to_bytes({0x0102030405060708ull});
  CHECK(b.size() == 8);
  CHECK(b[0] == 0x08);
  CHECK(b[7] == 0x01);
  FieldRng rng(5);
  for (int i = 0; i < 1000; ++i) {
    FieldElement a = rng.next(f);
    auto bytes = Field::to_bytes(a);
    CHECK(f.from_bytes(bytes.data()) == a);
  }
}

TEST_CASE("rounding helpers") {
  CHECK(round_half_away(1.5) == 2);
  CHECK(round_half_away(-1.5) == -2);
  CHECK(round_half_away(2.4) == 2);
  CHECK(round_div_half_away(3, 2) == 2);
  CHECK(round_div_half_away(-3, 2) == -2);
  CHECK(round_div_half_away(5, 4) == 1);
  CHECK(round_div_half_away(1000, 1000) == 1);
  CHECK(round_div_half_away(1499, 1000) == 1);
  CHECK(round_div_half_away(1500, 1000) == 2);
  CHECK(round_div_half_away(-1500, 1000) == -2);
}

TEST_CASE("primality helper") {
  CHECK(is_prime_u64(Field::kMersenne61));
  CHECK(is_prime_u64(251));
  CHECK(is_prime_u64(2));
  CHECK(!is_prime_u64(1));
  CHECK(!is_prime_u64(249));
  CHECK(!is_prime_u64(std::uint64_t{1} << 61));
}
