#pragma once

#include <cstdint>
#include <vector>

#include "mps/field.hpp"
#include "mps/prg.hpp"
#include "mps/util.hpp"

namespace mps {

enum class MaterialKind : uint8_t {
  Triple = 1,  // (a, b, c) with c = a*b, a and b uniform
  Lookup = 2,  // r uniform in [0, L) plus the one-hot vector e_r of length L
  Cmp = 3,     // R uniform in [0, 2^(K+1+sigma)) plus its K+1 low bits
};

// One party's shares of one material item.
struct BeaverTriple {
  Fe a, b, c;
};

struct LookupMaterial {
  Fe r;
  std::vector<Fe> onehot;  // length L
};

struct CmpMaterial {
  Fe mask;               // share of R
  std::vector<Fe> bits;  // shares of bits 0..K of R
};

// Dealer-side derivation. Every item is a pure function of
// (seed, kind, L, index), so requests are idempotent and the dealer keeps
// no per-session state. Party b < beta-1 receives PRG shares, the last
// party the adjusted one.
namespace dealer {

inline std::vector<Fe> split(Fe x, int beta, Prg& rng) {
  std::vector<Fe> out(beta);
  Fe sum;
  for (int i = 0; i < beta - 1; ++i) {
    out[i] = rng.next_fe();
    sum += out[i];
  }
  out[beta - 1] = x - sum;
  return out;
}

inline std::vector<BeaverTriple> make_triple(uint64_t seed, uint64_t index, int beta) {
  Prg prg(seed, {static_cast<uint64_t>(MaterialKind::Triple), 0, index});
  Fe a = prg.next_fe();
  Fe b = prg.next_fe();
  Fe c = a * b;
  auto as = split(a, beta, prg), bs = split(b, beta, prg), cs = split(c, beta, prg);
  std::vector<BeaverTriple> out(beta);
  for (int i = 0; i < beta; ++i) out[i] = {as[i], bs[i], cs[i]};
  return out;
}

inline std::vector<LookupMaterial> make_lookup(uint64_t seed, uint64_t index, int beta,
                                               uint32_t L) {
  if (L == 0) throw ValueError("lookup material: L must be positive");
  Prg prg(seed, {static_cast<uint64_t>(MaterialKind::Lookup), L, index});
  uint64_t r = prg.next_below(L);
  std::vector<LookupMaterial> out(beta);
  for (auto& m : out) m.onehot.resize(L);
  auto rs = split(Fe::from_u64(r), beta, prg);
  for (int i = 0; i < beta; ++i) out[i].r = rs[i];
  for (uint32_t j = 0; j < L; ++j) {
    auto es = split(Fe::from_u64(j == r ? 1 : 0), beta, prg);
    for (int i = 0; i < beta; ++i) out[i].onehot[j] = es[i];
  }
  return out;
}

inline std::vector<CmpMaterial> make_cmp(uint64_t seed, uint64_t index, int beta, int K,
                                         int sigma) {
  Prg prg(seed, {static_cast<uint64_t>(MaterialKind::Cmp), 0, index});
  u128 R = prg.next_bits(K + 1 + sigma);
  std::vector<CmpMaterial> out(beta);
  for (auto& m : out) m.bits.resize(K + 1);
  auto ms = split(Fe::from_raw(R), beta, prg);
  for (int i = 0; i < beta; ++i) out[i].mask = ms[i];
  for (int j = 0; j <= K; ++j) {
    auto bs = split(Fe::from_u64(static_cast<uint64_t>((R >> j) & 1)), beta, prg);
    for (int i = 0; i < beta; ++i) out[i].bits[j] = bs[i];
  }
  return out;
}

}  // namespace dealer

// Wire encoding of one party's batch: per-item field elements in the
// documented order (a,b,c | r, e_r[0..L) | R, bit_0..bit_K).
inline void encode_triples(ByteWriter& w, std::span<const BeaverTriple> items) {
  for (const auto& t : items) {
    w.bytes(t.a.to_bytes());
    w.bytes(t.b.to_bytes());
    w.bytes(t.c.to_bytes());
  }
}

inline void encode_lookups(ByteWriter& w, std::span<const LookupMaterial> items) {
  for (const auto& m : items) {
    w.bytes(m.r.to_bytes());
    for (const Fe& e : m.onehot) w.bytes(e.to_bytes());
  }
}

inline void encode_cmps(ByteWriter& w, std::span<const CmpMaterial> items) {
  for (const auto& m : items) {
    w.bytes(m.mask.to_bytes());
    for (const Fe& b : m.bits) w.bytes(b.to_bytes());
  }
}

inline std::vector<BeaverTriple> decode_triples(ByteReader& r, uint32_t count) {
  std::vector<BeaverTriple> out(count);
  for (auto& t : out) {
    t.a = Fe::from_bytes(r.bytes(16));
    t.b = Fe::from_bytes(r.bytes(16));
    t.c = Fe::from_bytes(r.bytes(16));
  }
  return out;
}

inline std::vector<LookupMaterial> decode_lookups(ByteReader& r, uint32_t count, uint32_t L) {
  std::vector<LookupMaterial> out(count);
  for (auto& m : out) {
    m.r = Fe::from_bytes(r.bytes(16));
    m.onehot.resize(L);
    for (auto& e : m.onehot) e = Fe::from_bytes(r.bytes(16));
  }
  return out;
}

inline std::vector<CmpMaterial> decode_cmps(ByteReader& r, uint32_t count, int K) {
  std::vector<CmpMaterial> out(count);
  for (auto& m : out) {
    m.mask = Fe::from_bytes(r.bytes(16));
    m.bits.resize(K + 1);
    for (auto& b : m.bits) b = Fe::from_bytes(r.bytes(16));
  }
  return out;
}

}  // namespace mps
