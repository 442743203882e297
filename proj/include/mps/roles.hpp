#pragma once

#include <chrono>
#include <exception>
#include <thread>

#include "mps/session.hpp"

namespace mps {

using PeerChannels = std::map<PartyId, Channel*>;

namespace detail {

inline Channel* link(const PeerChannels& peers, PartyId id) {
  auto it = peers.find(id);
  if (it == peers.end() || it->second == nullptr)
    throw ProtocolError("no channel to " + id.to_string());
  return it->second;
}

// Best-effort abort broadcast so peers fail fast instead of timing out.
inline void broadcast_abort(const PeerChannels& peers, const SessionId& sid) {
  for (const auto& [id, ch] : peers) {
    if (!ch) continue;
    try {
      ch->send({MsgType::Abort, sid, 0, 0, {}});
    } catch (...) {
    }
  }
}

inline MessageFrame expect_type(Channel* ch, MsgType type, const SessionId& sid) {
  MessageFrame f = ch->recv();
  if (f.type == MsgType::Abort) throw ProtocolError("peer aborted");
  if (f.session != sid) throw ProtocolError("session id mismatch");
  if (f.type != type)
    throw ProtocolError(std::string("expected ") + to_string(type) + ", got " + to_string(f.type));
  return f;
}

}  // namespace detail

struct Timings {
  double setup_ms = 0;
  double traversal_ms = 0;
};

struct CspResult {
  PGStructure pg;
  Transcript transcript;
  EngineStats stats;
  uint32_t candidates_scored = 0;
  Timings timings;
};

// ---------------------------------------------------------------------------
// Setup handshake. The coordinator (CSP 0) broadcasts SETUP carrying the
// config digest; every other party checks it against its own config and
// answers SETUP_ACK with its digest, which the coordinator verifies.

namespace detail {

inline void coordinator_handshake(const SessionConfig& cfg, const PeerChannels& peers) {
  uint64_t digest = cfg.digest();
  std::vector<PartyId> others;
  for (int j = 1; j < cfg.n_csps; ++j) others.push_back(PartyId::csp(j));
  for (int l = 0; l < cfg.n_owners; ++l) others.push_back(PartyId::owner(l));
  others.push_back(PartyId::dealer());

  ByteWriter w;
  w.u64(digest);
  auto payload = w.take();
  for (PartyId id : others)
    link(peers, id)->send({MsgType::Setup, cfg.session_id, 0, 0, payload});
  for (PartyId id : others) {
    MessageFrame f = expect_type(link(peers, id), MsgType::SetupAck, cfg.session_id);
    ByteReader r(f.payload);
    if (r.u64() != digest)
      throw ProtocolError("config digest mismatch with " + id.to_string());
  }
}

inline void follower_handshake(const SessionConfig& cfg, Channel* coordinator) {
  MessageFrame f = expect_type(coordinator, MsgType::Setup, cfg.session_id);
  ByteReader r(f.payload);
  uint64_t digest = r.u64();
  if (digest != cfg.digest()) throw ProtocolError("config digest mismatch with coordinator");
  ByteWriter w;
  w.u64(cfg.digest());
  coordinator->send({MsgType::SetupAck, cfg.session_id, 0, 0, w.take()});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Data owner: shares its instance count at setup, then serves count
// requests with one additive share vector per CSP until the coordinator
// broadcasts the result. Owners are also output recipients here, so the
// decoded structure is returned.

inline PGStructure run_data_owner(const SessionConfig& cfg, int owner_index,
                                  const DataTable& table, const PeerChannels& peers) {
  try {
    cfg.validate();
    table.validate(cfg.schema);
    if (table.rows() > cfg.schema.m_max)
      throw ValueError("owner table exceeds m_max");
    const int beta = cfg.n_csps;
    const int target = cfg.target_index();

    detail::follower_handshake(cfg, detail::link(peers, PartyId::csp(0)));

    Prg m_rng(cfg.owner_seeds[owner_index], {0});
    auto m_shares = share(Fe::from_u64(static_cast<uint64_t>(table.rows())), beta, m_rng);
    for (int j = 0; j < beta; ++j) {
      ByteWriter w;
      w.bytes(m_shares[j].value.to_bytes());
      detail::link(peers, PartyId::csp(j))
          ->send({MsgType::InputMShare, cfg.session_id, 0, 0, w.take()});
    }

    Channel* coord = detail::link(peers, PartyId::csp(0));
    uint64_t request_ordinal = 1;
    for (;;) {
      MessageFrame f = coord->recv();
      if (f.session != cfg.session_id) throw ProtocolError("session id mismatch");
      switch (f.type) {
        case MsgType::CountRequest: {
          auto [req_target, U] = proto::decode_varset(f.payload);
          if (req_target != target) throw ProtocolError("count request for unexpected target");
          for (int v : U)
            if (v == target) throw ProtocolError("count request set contains the target");
          auto c = contingency(table, cfg.schema, target, U);
          std::vector<Fe> counts(c.counts.size());
          for (size_t i = 0; i < counts.size(); ++i)
            counts[i] = Fe::from_u64(static_cast<uint64_t>(c.counts[i]));
          Prg rng(cfg.owner_seeds[owner_index], {request_ordinal++});
          auto vecs = share_vector(counts, beta, rng);
          for (int j = 0; j < beta; ++j)
            detail::link(peers, PartyId::csp(j))
                ->send({MsgType::CountShares, cfg.session_id, f.round, f.gadget,
                        proto::encode_fe_vector(vecs[j])});
          break;
        }
        case MsgType::Result:
          return proto::decode_pg(f.payload);
        case MsgType::Abort:
          throw ProtocolError("coordinator aborted");
        default:
          throw ProtocolError(std::string("owner: unexpected ") + to_string(f.type));
      }
    }
  } catch (...) {
    detail::broadcast_abort(peers, cfg.session_id);
    throw;
  }
}

// ---------------------------------------------------------------------------
// Dealer: serves correlated-randomness requests derived statelessly from
// (seed, kind, L, index). It never receives any opened or masked value;
// inbound traffic is request counts only.

inline void run_dealer(const SessionConfig& cfg, const PeerChannels& peers) {
  try {
    cfg.validate();
    detail::follower_handshake(cfg, detail::link(peers, PartyId::csp(0)));

    auto serve = [&](int csp) {
      Channel* ch = detail::link(peers, PartyId::csp(csp));
      for (;;) {
        MessageFrame f = ch->recv();
        if (f.type == MsgType::Result || f.type == MsgType::Abort) return;
        if (f.session != cfg.session_id) throw ProtocolError("session id mismatch");
        if (f.type != MsgType::MaterialRequest)
          throw ProtocolError(std::string("dealer: unexpected ") + to_string(f.type));
        ByteReader r(f.payload);
        uint8_t kind_byte = r.u8();
        uint32_t count = r.u32();
        uint32_t L = r.u32();
        uint64_t start = r.u64();
        if (!r.done() || kind_byte < 1 || kind_byte > 3)
          throw ProtocolError("dealer: malformed request");
        auto kind = static_cast<MaterialKind>(kind_byte);
        if (kind == MaterialKind::Lookup && L > static_cast<uint64_t>(cfg.schema.m_max) + 1)
          throw ProtocolError("dealer: lookup length exceeds m_max + 1");

        ByteWriter w;
        w.u8(kind_byte);
        w.u32(count);
        for (uint64_t i = 0; i < count; ++i) {
          switch (kind) {
            case MaterialKind::Triple: {
              auto items = dealer::make_triple(cfg.dealer_seed, start + i, cfg.n_csps);
              encode_triples(w, std::span<const BeaverTriple>(&items[csp], 1));
              break;
            }
            case MaterialKind::Lookup: {
              auto items = dealer::make_lookup(cfg.dealer_seed, start + i, cfg.n_csps, L);
              encode_lookups(w, std::span<const LookupMaterial>(&items[csp], 1));
              break;
            }
            case MaterialKind::Cmp: {
              auto items = dealer::make_cmp(cfg.dealer_seed, start + i, cfg.n_csps,
                                            cfg.params.K, cfg.params.sigma);
              encode_cmps(w, std::span<const CmpMaterial>(&items[csp], 1));
              break;
            }
          }
        }
        ch->send({MsgType::Material, cfg.session_id, f.round, f.gadget, w.take()});
      }
    };

    std::vector<std::thread> servers;
    std::vector<std::exception_ptr> errors(cfg.n_csps);
    for (int j = 0; j < cfg.n_csps; ++j)
      servers.emplace_back([&, j] {
        try {
          serve(j);
        } catch (...) {
          errors[j] = std::current_exception();
        }
      });
    for (auto& t : servers) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  } catch (...) {
    detail::broadcast_abort(peers, cfg.session_id);
    throw;
  }
}

// ---------------------------------------------------------------------------
// CSP: executes the lattice engine over the secure backend. The
// coordinator additionally sequences count requests toward the owners and
// broadcasts the final structure; every CSP recomputes the identical
// public control flow and cross-checks a digest each layer.

inline CspResult run_csp(const SessionConfig& cfg, int party, const PeerChannels& peers) {
  try {
    cfg.validate();
    const int beta = cfg.n_csps;
    const int alpha = cfg.n_owners;
    const int target = cfg.target_index();
    auto t0 = std::chrono::steady_clock::now();

    if (party == 0)
      detail::coordinator_handshake(cfg, peers);
    else
      detail::follower_handshake(cfg, detail::link(peers, PartyId::csp(0)));

    std::vector<Channel*> csp_peers(beta, nullptr);
    for (int j = 0; j < beta; ++j)
      if (j != party) csp_peers[j] = detail::link(peers, PartyId::csp(j));
    Engine engine(cfg.params, party, beta, cfg.session_id, csp_peers,
                  detail::link(peers, PartyId::dealer()));

    // Owners enter their private instance counts; the combined m stays
    // shared for the whole session.
    Engine::Sh m_share{};
    for (int l = 0; l < alpha; ++l) {
      MessageFrame f = detail::expect_type(detail::link(peers, PartyId::owner(l)),
                                           MsgType::InputMShare, cfg.session_id);
      ByteReader r(f.payload);
      m_share += Fe::from_bytes(r.bytes(16));
      if (!r.done()) throw ProtocolError("m share: trailing bytes");
    }

    LogTable logtab = build_log_table(cfg.schema.m_max, cfg.params.f);
    std::vector<Fe> log_fe(logtab.t.size());
    for (size_t i = 0; i < log_fe.size(); ++i) log_fe[i] = Fe::from_signed(logtab.t[i]);

    // T[m] is looked up once and reused by every penalty term and bound.
    auto log_m = engine.lookup_batch(std::span<const Engine::Sh>(&m_share, 1), log_fe)[0];

    auto get_counts = [&](const VarSet& U) -> std::vector<Fe> {
      int64_t cells = joint_states(cfg.schema, U) * cfg.schema.variables[target].arity;
      if (cells > cfg.cell_budget) throw ProtocolError("candidate exceeds cell budget");
      if (party == 0) {
        auto payload = proto::encode_varset(target, U);
        for (int l = 0; l < alpha; ++l)
          detail::link(peers, PartyId::owner(l))
              ->send({MsgType::CountRequest, cfg.session_id, 0, 0, payload});
      }
      std::vector<Fe> acc(static_cast<size_t>(cells));
      for (int l = 0; l < alpha; ++l) {
        MessageFrame f = detail::expect_type(detail::link(peers, PartyId::owner(l)),
                                             MsgType::CountShares, cfg.session_id);
        auto vec = proto::decode_fe_vector(f.payload);
        if (vec.size() != acc.size()) throw ProtocolError("count share vector size mismatch");
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += vec[i];
      }
      return acc;
    };

    SecureBackend backend(engine, cfg, log_fe, log_m, get_counts);
    auto t1 = std::chrono::steady_clock::now();

    PGStructure pg = maximal_parent_sets(backend, cfg.effective_lmax(), cfg.mode,
                                         cfg.empty_set_penalty);
    auto t2 = std::chrono::steady_clock::now();

    if (party == 0) {
      auto payload = proto::encode_pg(pg);
      for (int l = 0; l < alpha; ++l)
        detail::link(peers, PartyId::owner(l))
            ->send({MsgType::Result, cfg.session_id, 0, 0, payload});
    }
    engine.send_done_to_dealer();

    CspResult res;
    res.pg = std::move(pg);
    res.transcript = std::move(engine.transcript());
    res.stats = engine.stats();
    res.candidates_scored = backend.candidates_scored();
    res.timings.setup_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    res.timings.traversal_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    return res;
  } catch (...) {
    detail::broadcast_abort(peers, cfg.session_id);
    throw;
  }
}

// ---------------------------------------------------------------------------
// All roles in one process over the in-process transport.

struct SimResult {
  PGStructure pg;
  Transcript transcript;
  EngineStats stats;
  uint32_t candidates_scored = 0;
  AuditReport audit;
  Timings timings;
  double total_ms = 0;
};

inline SimResult run_sim(const SessionConfig& cfg, const std::vector<DataTable>& owner_tables) {
  cfg.validate();
  if (static_cast<int>(owner_tables.size()) != cfg.n_owners)
    throw ValueError("run_sim: one table per owner required");
  int64_t total_rows = 0;
  for (const auto& t : owner_tables) total_rows += t.rows();
  if (total_rows > cfg.schema.m_max) throw ValueError("run_sim: combined rows exceed m_max");

  auto t0 = std::chrono::steady_clock::now();
  InProcHub hub;
  const int beta = cfg.n_csps, alpha = cfg.n_owners;

  auto peers_for = [&](PartyId me) {
    PeerChannels peers;
    auto add = [&](PartyId other) { peers[other] = hub.channel(me, other); };
    if (me.role == PartyId::Role::Csp) {
      for (int j = 0; j < beta; ++j)
        if (PartyId::csp(j) != me) add(PartyId::csp(j));
      for (int l = 0; l < alpha; ++l) add(PartyId::owner(l));
      add(PartyId::dealer());
    } else {
      for (int j = 0; j < beta; ++j) add(PartyId::csp(j));
    }
    return peers;
  };

  std::vector<CspResult> csp_results(beta);
  std::vector<PGStructure> owner_pgs(alpha);
  std::vector<std::exception_ptr> errors(beta + alpha + 1);
  std::vector<std::thread> threads;

  threads.emplace_back([&] {
    try {
      run_dealer(cfg, peers_for(PartyId::dealer()));
    } catch (...) {
      errors[0] = std::current_exception();
    }
  });
  for (int l = 0; l < alpha; ++l)
    threads.emplace_back([&, l] {
      try {
        owner_pgs[l] = run_data_owner(cfg, l, owner_tables[l], peers_for(PartyId::owner(l)));
      } catch (...) {
        errors[1 + l] = std::current_exception();
      }
    });
  for (int j = 0; j < beta; ++j)
    threads.emplace_back([&, j] {
      try {
        csp_results[j] = run_csp(cfg, j, peers_for(PartyId::csp(j)));
      } catch (...) {
        errors[1 + alpha + j] = std::current_exception();
      }
    });
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (int j = 1; j < beta; ++j) {
    if (csp_results[j].pg != csp_results[0].pg)
      throw ProtocolError("CSP outputs diverged");
    if (csp_results[j].transcript.digest() != csp_results[0].transcript.digest())
      throw ProtocolError("CSP transcripts diverged");
  }
  for (int l = 0; l < alpha; ++l)
    if (owner_pgs[l] != csp_results[0].pg) throw ProtocolError("owner-decoded output diverged");

  SimResult res;
  res.pg = csp_results[0].pg;
  res.transcript = std::move(csp_results[0].transcript);
  res.stats = csp_results[0].stats;
  res.candidates_scored = csp_results[0].candidates_scored;
  res.audit = transcript_audit(res.transcript, res.pg, res.candidates_scored);
  res.timings = csp_results[0].timings;
  res.total_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace mps
