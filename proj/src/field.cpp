#include "secmeter/field.hpp"

#include <cmath>

namespace secmeter {

Field::Field(std::uint64_t modulus) : p_(modulus) {
  if (modulus < 2 || modulus >= (std::uint64_t{1} << 62))
    throw std::invalid_argument("field: modulus must be in [2, 2^62)");
}

FieldElement Field::from_signed(std::int64_t x) const {
  if (x >= 0) return {(std::uint64_t)x % p_};
  std::uint64_t m = (std::uint64_t)(-(x + 1)) + 1;  // |x| without UB at INT64_MIN
  std::uint64_t r = m % p_;
  return {r == 0 ? 0 : p_ - r};
}

std::int64_t Field::to_signed(FieldElement a) const {
  if (a.v <= p_ / 2) return (std::int64_t)a.v;
  return -(std::int64_t)(p_ - a.v);
}

FieldElement Field::pow(FieldElement a, std::uint64_t e) const {
  FieldElement r = one();
  FieldElement base = a;
  while (e != 0) {
    if (e & 1) r = mul(r, base);
    base = mul(base, base);
    e >>= 1;
  }
  return r;
}

FieldElement Field::inv(FieldElement a) const {
  if (a.v == 0) throw ZeroInverseError();
  return pow(a, p_ - 2);
}

std::array<std::uint8_t, 8> Field::to_bytes(FieldElement a) {
  std::array<std::uint8_t, 8> out;
  for (int i = 0; i < 8; ++i) out[i] = (std::uint8_t)(a.v >> (8 * i));
  return out;
}

FieldElement Field::from_bytes(const std::uint8_t* b) const {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= (std::uint64_t)b[i] << (8 * i);
  return from_u64(v);
}

FieldElement FieldRng::next(const Field& f) {
  const std::uint64_t p = f.modulus();
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % p;
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return {x % p};
}

FieldElement FieldRng::next_nonzero(const Field& f) {
  FieldElement e;
  do {
    e = next(f);
  } while (e.v == 0);
  return e;
}

std::int64_t round_half_away(double x) {
  return (std::int64_t)std::llround(x);  // llround rounds halfway cases away from zero
}

std::int64_t round_div_half_away(__int128 numer, __int128 denom) {
  __int128 q = numer / denom;
  __int128 r = numer % denom;
  if (r * 2 >= denom) ++q;
  if (-r * 2 >= denom) --q;
  return (std::int64_t)q;
}

namespace {

std::uint64_t mulmod_u64(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return (std::uint64_t)((unsigned __int128)a * b % m);
}

std::uint64_t powmod_u64(std::uint64_t a, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  a %= m;
  while (e) {
    if (e & 1) r = mulmod_u64(r, a, m);
    a = mulmod_u64(a, a, m);
    e >>= 1;
  }
  return r;
}

}  // namespace

bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  // Deterministic Miller-Rabin base set for 64-bit integers.
  for (std::uint64_t a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    std::uint64_t x = powmod_u64(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 0; i < s - 1; ++i) {
      x = mulmod_u64(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

FixedPointCodec::FixedPointCodec(Field field, std::uint64_t scale)
    : field_(field), scale_(scale), half_range_(field.modulus() / 2) {
  if (scale == 0) throw std::invalid_argument("codec: scale must be positive");
}

FieldElement FixedPointCodec::encode_at(double x, std::uint64_t scale_factor) const {
  double scaled = x * (double)scale_factor;
  if (!(std::fabs(scaled) < (double)half_range_))
    throw RangeOverflowError("codec: |x|*scale exceeds representable range");
  return field_.from_signed(round_half_away(scaled));
}

FieldElement FixedPointCodec::from_scaled(std::int64_t scaled) const {
  std::uint64_t m = scaled >= 0 ? (std::uint64_t)scaled : (std::uint64_t)(-(scaled + 1)) + 1;
  if (m > half_range_) throw RangeOverflowError("codec: scaled value exceeds representable range");
  return field_.from_signed(scaled);
}

double FixedPointCodec::decode(FieldElement e) const {
  return (double)field_.to_signed(e) / (double)scale_;
}

}  // namespace secmeter
