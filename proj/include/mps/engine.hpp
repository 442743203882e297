#pragma once

#include <deque>
#include <map>
#include <span>
#include <vector>

#include "mps/material.hpp"
#include "mps/transcript.hpp"
#include "mps/transport.hpp"

namespace mps {

struct EngineStats {
  uint64_t rounds = 0;
  uint64_t opened_values = 0;
  uint64_t triples_consumed = 0;
  uint64_t cmp_consumed = 0;
  uint64_t lookup_consumed = 0;
};

// Per-CSP executor of the interactive gadgets: opening, Beaver
// multiplication, signed comparison and oblivious table lookup. These are
// the only places the protocol communicates about secret values; every
// opening lands in the transcript with its leakage class.
//
// All gadgets are batch-first: one logical invocation vectorizes its
// network rounds across the batch, so round counts stay independent of
// batch size.
class Engine {
 public:
  using Sh = Fe;  // this party's additive share

  Engine(const FieldParams& params, int party, int beta, SessionId session,
         std::vector<Channel*> csp_peers, Channel* dealer_channel)
      : params_(params),
        party_(party),
        beta_(beta),
        session_(session),
        peers_(std::move(csp_peers)),
        dealer_(dealer_channel) {
    params_.validate();
    if (beta_ < 2) throw ValueError("engine: need at least 2 CSPs");
    if (static_cast<int>(peers_.size()) != beta_) throw ValueError("engine: peer map size");
  }

  int party() const { return party_; }
  int beta() const { return beta_; }
  const FieldParams& params() const { return params_; }
  Transcript& transcript() { return transcript_; }
  const Transcript& transcript() const { return transcript_; }
  EngineStats& stats() { return stats_; }
  void set_scope(uint32_t scope) { scope_ = scope; }
  uint32_t scope() const { return scope_; }

  // Share of a public constant: held entirely by party 0.
  Sh from_public(Fe v) const { return party_ == 0 ? v : Fe{}; }
  Sh from_public_i64(int64_t v) const { return from_public(Fe::from_signed(v)); }

  // --- opening ------------------------------------------------------------

  std::vector<Fe> open_batch(std::span<const Sh> shares, LeakageClass cls) {
    uint32_t round = round_counter_++;
    uint32_t gadget = gadget_counter_++;
    ByteWriter w;
    w.u32(static_cast<uint32_t>(shares.size()));
    for (const Sh& s : shares) w.bytes(s.to_bytes());
    broadcast({MsgType::OpenPart, session_, round, gadget, w.take()});

    std::vector<Fe> sums(shares.begin(), shares.end());
    for (int j = 0; j < beta_; ++j) {
      if (j == party_) continue;
      MessageFrame f = expect(j, MsgType::OpenPart, round, gadget);
      ByteReader r(f.payload);
      uint32_t count = r.u32();
      if (count != shares.size()) throw ProtocolError("open: share count mismatch");
      for (uint32_t i = 0; i < count; ++i) sums[i] += Fe::from_bytes(r.bytes(16));
      if (!r.done()) throw ProtocolError("open: trailing bytes");
    }
    for (const Fe& v : sums)
      transcript_.entries.push_back({round, gadget, scope_, {v, cls}});
    stats_.rounds++;
    stats_.opened_values += sums.size();
    return sums;
  }

  Fe open(Sh s, LeakageClass cls) { return open_batch(std::span<const Sh>(&s, 1), cls)[0]; }

  // --- multiplication -----------------------------------------------------

  std::vector<Sh> mul_batch(std::span<const Sh> x, std::span<const Sh> y) {
    if (x.size() != y.size()) throw ValueError("mul: size mismatch");
    size_t n = x.size();
    if (n == 0) return {};
    auto triples = take_triples(n);

    std::vector<Sh> masked(2 * n);
    for (size_t i = 0; i < n; ++i) {
      masked[i] = x[i] - triples[i].a;
      masked[n + i] = y[i] - triples[i].b;
    }
    auto opened = open_batch(masked, LeakageClass::MaskedComparisonValue);

    std::vector<Sh> out(n);
    for (size_t i = 0; i < n; ++i) {
      Fe d = opened[i], e = opened[n + i];
      out[i] = triples[i].c + d * triples[i].b + e * triples[i].a + from_public(d * e);
    }
    return out;
  }

  Sh mul(Sh x, Sh y) {
    return mul_batch(std::span<const Sh>(&x, 1), std::span<const Sh>(&y, 1))[0];
  }

  // --- signed comparison ----------------------------------------------------
  //
  // ltz(d) for |d| < 2^K: shift to d' = d + 2^K in [0, 2^(K+1)), open the
  // statistically masked c = d' + R, then recover bit K of d' from the
  // public bits of c and the dealer's shared bits of R:
  //   bit_K(d') = c_K - R_K + 2u - u'
  // with u = [c mod 2^(K+1) < R mod 2^(K+1)], u' = [c mod 2^K < R mod 2^K],
  // both from one shared prefix-equality chain. d < 0 iff bit_K(d') = 0.

  std::vector<Sh> ltz_batch(std::span<const Sh> d) {
    size_t n = d.size();
    if (n == 0) return {};
    const int K = params_.K;
    auto cmps = take_cmps(n);

    u128 shift = static_cast<u128>(1) << K;
    std::vector<Sh> masked(n);
    for (size_t i = 0; i < n; ++i)
      masked[i] = d[i] + from_public(Fe::from_raw(shift)) + cmps[i].mask;
    auto opened = open_batch(masked, LeakageClass::MaskedComparisonValue);

    u128 c_bound = (static_cast<u128>(1) << (K + 1 + params_.sigma)) +
                   (static_cast<u128>(1) << (K + 1));
    std::vector<u128> c(n);
    for (size_t i = 0; i < n; ++i) {
      c[i] = opened[i].raw();
      if (c[i] >= c_bound) throw ProtocolError("ltz: masked opening out of range");
    }

    auto bit_of = [](u128 v, int j) -> int { return static_cast<int>((v >> j) & 1); };
    Fe one = Fe::from_u64(1);

    // eq_j = 1 - x_j - r_j + 2 x_j r_j, affine in the shared bit r_j.
    auto eq_share = [&](size_t i, int j) -> Sh {
      if (bit_of(c[i], j)) return cmps[i].bits[j];
      return from_public(one) - cmps[i].bits[j];
    };

    // Prefix products over bits K-1..0: prefix[j] = prod_{t=j..K-1} eq_t.
    std::vector<std::vector<Sh>> prefix(K);  // prefix[j], valid for j<K
    prefix[K - 1].assign(n, Sh{});
    for (size_t i = 0; i < n; ++i) prefix[K - 1][i] = eq_share(i, K - 1);
    for (int j = K - 2; j >= 0; --j) {
      std::vector<Sh> eqs(n);
      for (size_t i = 0; i < n; ++i) eqs[i] = eq_share(i, j);
      prefix[j] = mul_batch(eqs, prefix[j + 1]);
    }

    // u' = sum_j (1-x_j) r_j prefix[j+1] over j<K (prefix[K] = 1).
    std::vector<Sh> uprime(n);
    std::vector<Sh> lhs, rhs;
    std::vector<std::pair<size_t, int>> where;
    for (size_t i = 0; i < n; ++i) {
      if (bit_of(c[i], K - 1) == 0) uprime[i] += cmps[i].bits[K - 1];
      for (int j = 0; j < K - 1; ++j) {
        if (bit_of(c[i], j)) continue;
        lhs.push_back(cmps[i].bits[j]);
        rhs.push_back(prefix[j + 1][i]);
        where.emplace_back(i, j);
      }
    }
    auto prods = mul_batch(lhs, rhs);
    for (size_t t = 0; t < prods.size(); ++t) uprime[where[t].first] += prods[t];

    // u = (1-x_K) r_K + eq_K * u'.
    std::vector<Sh> eqk(n);
    for (size_t i = 0; i < n; ++i) eqk[i] = eq_share(i, K);
    auto eqk_up = mul_batch(eqk, uprime);
    std::vector<Sh> out(n);
    for (size_t i = 0; i < n; ++i) {
      Sh u = eqk_up[i];
      if (bit_of(c[i], K) == 0) u += cmps[i].bits[K];
      // bit_K(d') = x_K - R_K + 2u - u'; result = 1 - bit_K(d').
      Sh bit_k = from_public_i64(bit_of(c[i], K)) - cmps[i].bits[K] + u + u - uprime[i];
      out[i] = from_public(one) - bit_k;
    }
    return out;
  }

  // Public strict comparison [a < b]; opens exactly one bit.
  bool open_lt(Sh a, Sh b) {
    Sh d = a - b;
    auto bit = ltz_batch(std::span<const Sh>(&d, 1));
    Fe v = open(bit[0], LeakageClass::ComparisonBit);
    if (v.raw() > 1) throw ProtocolError("comparison bit not boolean");
    return v.raw() == 1;
  }

  // --- oblivious table lookup ----------------------------------------------
  //
  // Shifted one-hot read: t = idx - r, b = ltz(t), open z = t + L*b
  // (uniform on [0, L), independent of idx), then combine the rotated
  // public table with the shared one-hot vector locally.

  std::vector<Sh> lookup_batch(std::span<const Sh> idx, std::span<const Fe> table) {
    size_t n = idx.size();
    if (n == 0) return {};
    const uint32_t L = static_cast<uint32_t>(table.size());
    if (L == 0) throw ValueError("lookup: empty table");
    auto lms = take_lookups(n, L);

    std::vector<Sh> t(n);
    for (size_t i = 0; i < n; ++i) t[i] = idx[i] - lms[i].r;
    auto b = ltz_batch(t);

    std::vector<Sh> zshare(n);
    Fe Lfe = Fe::from_u64(L);
    for (size_t i = 0; i < n; ++i) zshare[i] = t[i] + Lfe * b[i];
    auto zopen = open_batch(zshare, LeakageClass::MaskedLookupIndex);

    std::vector<Sh> out(n);
    for (size_t i = 0; i < n; ++i) {
      if (zopen[i].raw() >= L) throw ProtocolError("lookup: corrupted material (z out of range)");
      uint32_t z = static_cast<uint32_t>(zopen[i].raw());
      Sh acc{};
      for (uint32_t j = 0; j < L; ++j) {
        uint32_t rot = j + z;
        if (rot >= L) rot -= L;
        acc += table[rot] * lms[i].onehot[j];
      }
      out[i] = acc;
    }
    return out;
  }

  // --- layer agreement ------------------------------------------------------

  void exchange_layer_digest(uint64_t digest) {
    uint32_t round = round_counter_++;
    uint32_t gadget = gadget_counter_++;
    ByteWriter w;
    w.u64(digest);
    broadcast({MsgType::LayerDigest, session_, round, gadget, w.take()});
    for (int j = 0; j < beta_; ++j) {
      if (j == party_) continue;
      MessageFrame f = expect(j, MsgType::LayerDigest, round, gadget);
      ByteReader r(f.payload);
      if (r.u64() != digest) throw ProtocolError("layer digest mismatch with csp" + std::to_string(j));
    }
    stats_.rounds++;
  }

  // --- dealer material ------------------------------------------------------

  void send_done_to_dealer() {
    if (dealer_) dealer_->send({MsgType::Result, session_, 0, 0, {}});
  }

  // Test hook: pre-fill pools without a dealer channel.
  void push_triples(std::vector<BeaverTriple> ts) {
    for (auto& t : ts) triples_.push_back(std::move(t));
  }
  void push_cmps(std::vector<CmpMaterial> ms) {
    for (auto& m : ms) cmps_.push_back(std::move(m));
  }
  void push_lookups(uint32_t L, std::vector<LookupMaterial> ms) {
    for (auto& m : ms) lookups_[L].push_back(std::move(m));
  }

 private:
  void broadcast(const MessageFrame& f) {
    for (int j = 0; j < beta_; ++j) {
      if (j == party_) continue;
      peers_[j]->send(f);
    }
  }

  MessageFrame expect(int from, MsgType type, uint32_t round, uint32_t gadget) {
    MessageFrame f = peers_[from]->recv();
    if (f.type == MsgType::Abort) throw ProtocolError("peer csp" + std::to_string(from) + " aborted");
    if (f.type != type) throw ProtocolError(std::string("unexpected ") + to_string(f.type));
    if (f.session != session_) throw ProtocolError("session id mismatch");
    if (f.round != round || f.gadget != gadget) throw ProtocolError("round mismatch");
    return f;
  }

  std::vector<BeaverTriple> take_triples(size_t n) {
    ensure_material(MaterialKind::Triple, n, 0);
    std::vector<BeaverTriple> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      out.push_back(triples_.front());
      triples_.pop_front();
    }
    stats_.triples_consumed += n;
    return out;
  }
  std::vector<CmpMaterial> take_cmps(size_t n) {
    ensure_material(MaterialKind::Cmp, n, 0);
    std::vector<CmpMaterial> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      out.push_back(std::move(cmps_.front()));
      cmps_.pop_front();
    }
    stats_.cmp_consumed += n;
    return out;
  }
  std::vector<LookupMaterial> take_lookups(size_t n, uint32_t L) {
    ensure_material(MaterialKind::Lookup, n, L);
    auto& pool = lookups_[L];
    std::vector<LookupMaterial> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      out.push_back(std::move(pool.front()));
      pool.pop_front();
    }
    stats_.lookup_consumed += n;
    return out;
  }

  size_t pool_size(MaterialKind kind, uint32_t L) {
    switch (kind) {
      case MaterialKind::Triple: return triples_.size();
      case MaterialKind::Cmp: return cmps_.size();
      case MaterialKind::Lookup: return lookups_[L].size();
    }
    return 0;
  }

  void ensure_material(MaterialKind kind, size_t need, uint32_t L) {
    size_t have = pool_size(kind, L);
    if (have >= need) return;
    if (!dealer_) throw ProtocolError("material pool exhausted and no dealer attached");
    size_t chunk = kind == MaterialKind::Triple ? 2048 : (kind == MaterialKind::Cmp ? 256 : 64);
    uint32_t count = static_cast<uint32_t>(std::max(need - have, chunk));

    uint64_t& next = next_index_[{static_cast<uint8_t>(kind), L}];
    ByteWriter w;
    w.u8(static_cast<uint8_t>(kind));
    w.u32(count);
    w.u32(L);
    w.u64(next);
    dealer_->send({MsgType::MaterialRequest, session_, 0, 0, w.take()});

    MessageFrame f = dealer_->recv();
    if (f.type == MsgType::Abort) throw ProtocolError("dealer aborted");
    if (f.type != MsgType::Material) throw ProtocolError("expected MATERIAL");
    if (f.session != session_) throw ProtocolError("session id mismatch");
    ByteReader r(f.payload);
    if (r.u8() != static_cast<uint8_t>(kind)) throw ProtocolError("material kind mismatch");
    uint32_t got = r.u32();
    if (got != count) throw ProtocolError("material count mismatch");
    switch (kind) {
      case MaterialKind::Triple: {
        auto items = decode_triples(r, got);
        for (auto& t : items) triples_.push_back(t);
        break;
      }
      case MaterialKind::Cmp: {
        auto items = decode_cmps(r, got, params_.K);
        for (auto& m : items) cmps_.push_back(std::move(m));
        break;
      }
      case MaterialKind::Lookup: {
        auto items = decode_lookups(r, got, L);
        auto& pool = lookups_[L];
        for (auto& m : items) pool.push_back(std::move(m));
        break;
      }
    }
    if (!r.done()) throw ProtocolError("material: trailing bytes");
    next += got;
  }

  FieldParams params_;
  int party_;
  int beta_;
  SessionId session_{};
  std::vector<Channel*> peers_;  // indexed by CSP party, self nullptr
  Channel* dealer_ = nullptr;

  uint32_t round_counter_ = 0;
  uint32_t gadget_counter_ = 0;
  uint32_t scope_ = kScopeSetup;

  std::deque<BeaverTriple> triples_;
  std::deque<CmpMaterial> cmps_;
  std::map<uint32_t, std::deque<LookupMaterial>> lookups_;
  std::map<std::pair<uint8_t, uint32_t>, uint64_t> next_index_;

  Transcript transcript_;
  EngineStats stats_;
};

}  // namespace mps
