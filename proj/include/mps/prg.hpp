#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "mps/field.hpp"

namespace mps {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic pseudo-randomness for shares, masks and dealer material.
// Domain separation via tag chaining lets the dealer derive any material
// item independently from (seed, kind, index).
class Prg {
 public:
  explicit Prg(uint64_t seed) : gen_(mix_seed(seed, {})) {}
  Prg(uint64_t seed, std::initializer_list<uint64_t> tags) : gen_(mix_seed(seed, tags)) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 2^bits), bits <= 127.
  u128 next_bits(int bits) {
    u128 v = (static_cast<u128>(gen_()) << 64) | gen_();
    if (bits < 128) v &= (static_cast<u128>(1) << bits) - 1;
    return v;
  }

  // Uniform field element; p = 2^127 - 1 so only the all-ones draw is rejected.
  Fe next_fe() {
    for (;;) {
      u128 v = next_bits(127);
      if (v != Fe::modulus()) return Fe::from_raw(v);
    }
  }

  // Uniform in [0, n) by masked rejection (implementation-independent).
  uint64_t next_below(uint64_t n) {
    if (n == 0) throw ValueError("next_below: empty range");
    if (n == 1) return 0;
    uint64_t mask = ~0ULL >> __builtin_clzll(n - 1);
    for (;;) {
      uint64_t v = gen_() & mask;
      if (v < n) return v;
    }
  }

 private:
  static std::mt19937_64 mix_seed(uint64_t seed, std::initializer_list<uint64_t> tags) {
    uint64_t s = seed ^ 0xa5a5a5a5deadbeefULL;
    uint64_t acc = splitmix64(s);
    for (uint64_t t : tags) {
      s ^= t + 0x9e3779b97f4a7c15ULL + (acc << 6) + (acc >> 2);
      acc = splitmix64(s);
    }
    return std::mt19937_64(acc);
  }

  std::mt19937_64 gen_;
};

}  // namespace mps
