#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "zkinfer/errors.hpp"

namespace zkinfer {

using u64 = std::uint64_t;
using u128 = unsigned __int128;
using i64 = std::int64_t;

// A field element is its least nonnegative residue in [0, p-1]. Plain data;
// all arithmetic goes through the owning Field so the modulus stays a
// runtime parameter (tests use tiny primes for exhaustive gadget sweeps).
struct FieldElement {
  u64 value = 0;

  friend bool operator==(FieldElement a, FieldElement b) { return a.value == b.value; }
  friend bool operator!=(FieldElement a, FieldElement b) { return a.value != b.value; }
};

namespace detail {

inline u64 mulmod_u64(u64 a, u64 b, u64 m) {
  return static_cast<u64>((static_cast<u128>(a) * b) % m);
}

inline u64 powmod_u64(u64 base, u64 exp, u64 m) {
  u64 acc = 1 % m;
  base %= m;
  while (exp != 0) {
    if (exp & 1) acc = mulmod_u64(acc, base, m);
    base = mulmod_u64(base, base, m);
    exp >>= 1;
  }
  return acc;
}

// Deterministic Miller-Rabin, valid for all 64-bit inputs.
inline bool is_prime_u64(u64 n) {
  if (n < 2) return false;
  for (u64 q : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    if (n == q) return true;
    if (n % q == 0) return false;
  }
  u64 d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  for (u64 a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    u64 x = powmod_u64(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool witness = true;
    for (int i = 0; i < r - 1; ++i) {
      x = mulmod_u64(x, x, n);
      if (x == n - 1) {
        witness = false;
        break;
      }
    }
    if (witness) return false;
  }
  return true;
}

}  // namespace detail

// Prime field Z/pZ with the signed encode/decode convention used everywhere
// else: a residue v decodes to v if v <= (p-1)/2, else v - p (balanced
// residue). Default prime is 2^61 - 1, which keeps products in a 128-bit
// intermediate and admits a shift-based reduction.
class Field {
public:
  static constexpr u64 kMersenne61 = (1ull << 61) - 1;

  Field() : Field(kMersenne61, "m61") {}

  Field(u64 p, std::string name) : p_(p), name_(std::move(name)) {
    if (p < 2 || p >= (1ull << 63))
      fail(ErrorKind::Config, "field modulus out of supported range: " + std::to_string(p));
    if (!detail::is_prime_u64(p))
      fail(ErrorKind::Config, "field modulus is not prime: " + std::to_string(p));
    half_ = (p - 1) >> 1;
  }

  u64 modulus() const { return p_; }
  const std::string& name() const { return name_; }
  u64 half() const { return half_; }

  FieldElement zero() const { return {0}; }
  FieldElement one() const { return {1 % p_}; }
  FieldElement element(u64 v) const { return {v % p_}; }

  FieldElement add(FieldElement a, FieldElement b) const {
    check_member(a);
    check_member(b);
    u64 s = a.value + b.value;
    if (s >= p_) s -= p_;
    return {s};
  }

  FieldElement sub(FieldElement a, FieldElement b) const {
    check_member(a);
    check_member(b);
    return {a.value >= b.value ? a.value - b.value : a.value + p_ - b.value};
  }

  FieldElement neg(FieldElement a) const {
    check_member(a);
    return {a.value == 0 ? 0 : p_ - a.value};
  }

  FieldElement mul(FieldElement a, FieldElement b) const {
    check_member(a);
    check_member(b);
    if (p_ == kMersenne61) {
      u128 z = static_cast<u128>(a.value) * b.value;
      u64 lo = static_cast<u64>(z) & kMersenne61;
      u64 hi = static_cast<u64>(z >> 61);
      u64 s = lo + hi;
      if (s >= kMersenne61) s -= kMersenne61;
      return {s};
    }
    return {detail::mulmod_u64(a.value, b.value, p_)};
  }

  FieldElement pow(FieldElement base, u64 exp) const {
    check_member(base);
    return {detail::powmod_u64(base.value, exp, p_)};
  }

  // Inverse by exponentiation; used by test oracles only, never in circuits.
  FieldElement inv(FieldElement a) const {
    check_member(a);
    if (a.value == 0) fail(ErrorKind::Range, "inverse of zero");
    return pow(a, p_ - 2);
  }

  FieldElement encode_signed(i64 x) const {
    u64 mag = x < 0 ? static_cast<u64>(-(x + 1)) + 1 : static_cast<u64>(x);
    if (mag > half_)
      fail(ErrorKind::Range,
           "signed value " + std::to_string(x) + " outside [-(p-1)/2, (p-1)/2]");
    return {x < 0 ? p_ - mag : mag};
  }

  i64 decode_signed(FieldElement v) const {
    check_member(v);
    if (v.value <= half_) return static_cast<i64>(v.value);
    return -static_cast<i64>(p_ - v.value);
  }

private:
  void check_member(FieldElement a) const {
    if (a.value >= p_)
      fail(ErrorKind::Config, "field element " + std::to_string(a.value) +
                                  " is not a residue mod " + std::to_string(p_) +
                                  " (mismatched field configs?)");
  }

  u64 p_;
  std::string name_;
  u64 half_;
};

}  // namespace zkinfer
