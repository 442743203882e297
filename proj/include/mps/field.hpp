#pragma once

#include <array>
#include <cstdint>

#include "mps/util.hpp"

namespace mps {

// Arithmetic in GF(p) with p = 2^127 - 1. The Mersenne shape keeps the
// reduction to shifts and adds, and leaves enough headroom above the
// score magnitude bound for statistically masked openings.
class Fe {
 public:
  static constexpr u128 modulus() { return (static_cast<u128>(1) << 127) - 1; }

  constexpr Fe() : v_(0) {}
  static Fe from_raw(u128 v) { return Fe(v % modulus()); }
  static Fe from_u64(uint64_t v) { return Fe(static_cast<u128>(v)); }
  static Fe from_signed(i128 v) {
    if (v >= 0) return Fe(static_cast<u128>(v) % modulus());
    u128 mag = static_cast<u128>(-v) % modulus();
    return Fe(mag == 0 ? 0 : modulus() - mag);
  }

  u128 raw() const { return v_; }

  friend Fe operator+(Fe a, Fe b) {
    u128 s = a.v_ + b.v_;  // both < 2^127, no overflow
    if (s >= modulus()) s -= modulus();
    return Fe(s);
  }
  friend Fe operator-(Fe a, Fe b) {
    return Fe(a.v_ >= b.v_ ? a.v_ - b.v_ : a.v_ + modulus() - b.v_);
  }
  Fe operator-() const { return Fe(v_ == 0 ? 0 : modulus() - v_); }

  friend Fe operator*(Fe a, Fe b) {
    // 127x127 -> 254-bit product via 64-bit limbs, then Mersenne folding.
    uint64_t a0 = static_cast<uint64_t>(a.v_), a1 = static_cast<uint64_t>(a.v_ >> 64);
    uint64_t b0 = static_cast<uint64_t>(b.v_), b1 = static_cast<uint64_t>(b.v_ >> 64);
    u128 ll = static_cast<u128>(a0) * b0;
    u128 lh = static_cast<u128>(a0) * b1;
    u128 hl = static_cast<u128>(a1) * b0;
    u128 hh = static_cast<u128>(a1) * b1;

    u128 mid = lh + hl;  // < 2^128: each term < 2^127 since a1,b1 < 2^63
    u128 lo = ll + (mid << 64);
    u128 carry = (lo < ll) ? 1 : 0;
    u128 hi = hh + (mid >> 64) + carry;  // product = hi*2^128 + lo

    // hi*2^128 + lo = A*2^127 + B with A = 2*hi + top bit of lo.
    constexpr u128 mask = (static_cast<u128>(1) << 127) - 1;
    u128 A = (hi << 1) | (lo >> 127);
    u128 B = lo & mask;
    u128 t = A + B;  // A < 2^127 (product < 2^254), so no overflow
    t = (t >> 127) + (t & mask);
    if (t >= modulus()) t -= modulus();
    return Fe(t);
  }

  Fe& operator+=(Fe o) { return *this = *this + o; }
  Fe& operator-=(Fe o) { return *this = *this - o; }
  Fe& operator*=(Fe o) { return *this = *this * o; }

  bool operator==(const Fe& o) const { return v_ == o.v_; }
  bool operator!=(const Fe& o) const { return v_ != o.v_; }

  // Centered representative; requires |value| < p/2 to be meaningful.
  i128 signed_lift() const {
    if (v_ < (modulus() >> 1)) return static_cast<i128>(v_);
    return static_cast<i128>(v_) - static_cast<i128>(modulus());
  }

  std::array<uint8_t, 16> to_bytes() const {
    std::array<uint8_t, 16> out{};
    for (int i = 0; i < 16; ++i) out[i] = static_cast<uint8_t>(v_ >> (8 * i));
    return out;
  }
  static Fe from_bytes(std::span<const uint8_t> b) {
    if (b.size() < 16) throw ProtocolError("short field element");
    u128 v = 0;
    for (int i = 0; i < 16; ++i) v |= static_cast<u128>(b[i]) << (8 * i);
    if (v >= modulus()) throw ProtocolError("non-canonical field element");
    return Fe(v);
  }

  std::string to_string() const { return u128_to_string(v_); }

 private:
  explicit constexpr Fe(u128 v) : v_(v) {}
  u128 v_;
};

// Session-wide numeric parameters. p is fixed by Fe; these control the
// fixed-point scale and the headroom used by masked comparisons.
struct FieldParams {
  int f = 16;      // fraction bits of the fixed-point encoding
  int K = 40;      // all compared values satisfy |x| < 2^K
  int sigma = 40;  // statistical masking bits

  void validate() const {
    if (f < 1) throw ValueError("FieldParams: f must be >= 1");
    if (K < 2 || sigma < 1) throw ValueError("FieldParams: K and sigma must be positive");
    // Masked comparison opens d' + R < 2^(K+1) + 2^(K+1+sigma); keep it
    // well below p so the opening never wraps.
    if (K + sigma + 2 >= 126) throw ValueError("FieldParams: K + sigma + 2 must be < 126");
  }
};

}  // namespace mps
