#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace secmeter {

// Canonical residue in [0, p). Arithmetic goes through Field, which carries
// the modulus; elements themselves are a bare word so that share containers
// stay flat and the wire encoding is exactly 8 bytes.
struct FieldElement {
  std::uint64_t v = 0;
  friend bool operator==(const FieldElement&, const FieldElement&) = default;
};

struct ZeroInverseError : std::domain_error {
  ZeroInverseError() : std::domain_error("field: inverse of zero") {}
};

struct RangeOverflowError : std::range_error {
  explicit RangeOverflowError(const std::string& what) : std::range_error(what) {}
};

// Prime field F_p with p < 2^62. Default modulus is the Mersenne prime
// 2^61 - 1, reduced by shift-and-fold; other moduli (e.g. 251 in tests)
// use plain 128-bit remainder.
class Field {
 public:
  static constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;

  explicit Field(std::uint64_t modulus = kMersenne61);

  std::uint64_t modulus() const { return p_; }
  FieldElement zero() const { return {0}; }
  FieldElement one() const { return {1 % p_}; }

  FieldElement from_u64(std::uint64_t x) const { return {x % p_}; }
  FieldElement from_signed(std::int64_t x) const;
  // Centered lift: result in (-p/2, p/2].
  std::int64_t to_signed(FieldElement a) const;

  FieldElement add(FieldElement a, FieldElement b) const {
    std::uint64_t s = a.v + b.v;  // p < 2^62, no carry
    return {s >= p_ ? s - p_ : s};
  }
  FieldElement sub(FieldElement a, FieldElement b) const {
    return {a.v >= b.v ? a.v - b.v : a.v + p_ - b.v};
  }
  FieldElement neg(FieldElement a) const { return {a.v == 0 ? 0 : p_ - a.v}; }
  FieldElement mul(FieldElement a, FieldElement b) const {
    unsigned __int128 t = (unsigned __int128)a.v * b.v;
    if (p_ == kMersenne61) {
      std::uint64_t lo = (std::uint64_t)(t & kMersenne61);
      std::uint64_t hi = (std::uint64_t)(t >> 61);
      std::uint64_t s = lo + hi;
      s = (s & kMersenne61) + (s >> 61);
      return {s >= kMersenne61 ? s - kMersenne61 : s};
    }
    return {(std::uint64_t)(t % p_)};
  }
  FieldElement pow(FieldElement a, std::uint64_t e) const;
  // Fermat inverse a^(p-2); throws ZeroInverseError on a == 0.
  FieldElement inv(FieldElement a) const;

  // 8-byte little-endian wire encoding.
  static std::array<std::uint8_t, 8> to_bytes(FieldElement a);
  FieldElement from_bytes(const std::uint8_t* b) const;

  friend bool operator==(const Field&, const Field&) = default;

 private:
  std::uint64_t p_;
};

// Uniform field elements from a seeded mt19937_64, via rejection so the
// draw sequence depends only on the seed and the modulus.
class FieldRng {
 public:
  explicit FieldRng(std::uint64_t seed) : gen_(seed) {}
  FieldElement next(const Field& f);
  FieldElement next_nonzero(const Field& f);
  std::uint64_t next_u64() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

std::int64_t round_half_away(double x);
// Integer division rounding half away from zero; divisor > 0.
std::int64_t round_div_half_away(__int128 numer, __int128 denom);

bool is_prime_u64(std::uint64_t n);

// Maps physical quantities (kWh, currency) to field elements as signed
// scaled integers; negatives live above half_range, two's-complement style.
class FixedPointCodec {
 public:
  explicit FixedPointCodec(Field field, std::uint64_t scale = 1000);

  const Field& field() const { return field_; }
  std::uint64_t scale() const { return scale_; }
  std::uint64_t half_range() const { return half_range_; }

  FieldElement encode(double x) const { return encode_at(x, scale_); }
  // Encode at an explicit scale factor (e.g. scale^2 for dynamic base prices).
  FieldElement encode_at(double x, std::uint64_t scale_factor) const;
  FieldElement from_scaled(std::int64_t scaled) const;

  double decode(FieldElement e) const;
  std::int64_t decode_scaled(FieldElement e) const { return field_.to_signed(e); }

 private:
  Field field_;
  std::uint64_t scale_;
  std::uint64_t half_range_;
};

}  // namespace secmeter
