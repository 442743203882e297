#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <thread>

#include "mps/engine.hpp"
#include "mps/lattice.hpp"
#include "mps/sharing.hpp"

namespace mps {

// ---------------------------------------------------------------------------
// Session configuration, shared verbatim by every party. The digest of the
// canonical JSON form is checked during setup; a mismatch aborts.

struct SessionConfig {
  Schema schema;
  std::string target;
  int l_max = -1;  // negative: n - 1
  TraversalMode mode = TraversalMode::Corrected;
  bool empty_set_penalty = false;
  FieldParams params;
  int64_t cell_budget = 1'000'000;
  int n_csps = 3;
  int n_owners = 1;
  uint64_t dealer_seed = 1;
  std::vector<uint64_t> owner_seeds;
  SessionId session_id{};
  std::vector<std::string> csp_endpoints;  // TCP deployments only

  int target_index() const { return schema.index_of(target); }
  int effective_lmax() const { return l_max < 0 ? schema.n() - 1 : l_max; }

  // Largest joint-state count of any candidate set the traversal may score:
  // the full set (needed for the entropy bound) and the worst
  // capped-cardinality layer set.
  int64_t max_joint_states() const {
    int ti = target_index();
    std::vector<int64_t> arities;
    for (int j = 0; j < schema.n(); ++j)
      if (j != ti) arities.push_back(schema.variables[j].arity);
    std::sort(arities.rbegin(), arities.rend());
    int take = std::min<int>(effective_lmax(), static_cast<int>(arities.size()));
    int64_t q_full = 1, q_layer = 1;
    for (int t = 0; t < static_cast<int>(arities.size()); ++t) {
      q_full *= arities[t];
      if (t < take) q_layer *= arities[t];
      if (q_full > (static_cast<int64_t>(1) << 50)) return q_full;  // callers reject via budget
    }
    return std::max(q_full, q_layer);
  }

  void validate() const {
    schema.validate();
    params.validate();
    (void)target_index();
    if (n_csps < 2) throw ValueError("config: need at least 2 CSPs");
    if (n_owners < 1) throw ValueError("config: need at least 1 data owner");
    if (static_cast<int>(owner_seeds.size()) != n_owners)
      throw ValueError("config: owner_seeds must have one entry per owner");
    if (schema.m_max > (1 << 22)) throw ValueError("config: m_max too large for a lookup table");
    int r_i = schema.variables[target_index()].arity;
    int64_t q_max = max_joint_states();
    if (q_max * r_i > cell_budget)
      throw ValueError("config: candidate cell count exceeds the cell budget");
    LogTable lt = build_log_table(schema.m_max, params.f);
    int64_t bound = score2_magnitude_bound(schema.m_max, q_max, r_i, lt);
    if (bound >= (static_cast<int64_t>(1) << (params.K - 1)))
      throw ValueError("config: doubled-score bound exceeds 2^(K-1); raise K");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["schema"] = schema_to_json(schema);
    j["target"] = target;
    j["lmax"] = l_max;
    j["mode"] = to_string(mode);
    j["empty_set_penalty"] = empty_set_penalty;
    j["params"] = {{"f", params.f}, {"K", params.K}, {"sigma", params.sigma}};
    j["cell_budget"] = cell_budget;
    j["csps"] = n_csps;
    j["owners"] = n_owners;
    j["dealer_seed"] = dealer_seed;
    j["owner_seeds"] = owner_seeds;
    char hex[33] = {0};
    for (int i = 0; i < 16; ++i) std::snprintf(hex + 2 * i, 3, "%02x", session_id[i]);
    j["session_id"] = std::string(hex, 32);
    j["csp_endpoints"] = csp_endpoints;
    return j;
  }

  static SessionConfig from_json(const nlohmann::json& j) {
    SessionConfig c;
    c.schema = schema_from_json(j.at("schema"));
    c.target = j.at("target").get<std::string>();
    c.l_max = j.value("lmax", -1);
    c.mode = traversal_mode_from_string(j.value("mode", std::string("corrected")));
    c.empty_set_penalty = j.value("empty_set_penalty", false);
    if (j.contains("params")) {
      c.params.f = j["params"].value("f", 16);
      c.params.K = j["params"].value("K", 40);
      c.params.sigma = j["params"].value("sigma", 40);
    }
    c.cell_budget = j.value("cell_budget", static_cast<int64_t>(1'000'000));
    c.n_csps = j.value("csps", 3);
    c.n_owners = j.value("owners", 1);
    c.dealer_seed = j.value("dealer_seed", static_cast<uint64_t>(1));
    if (j.contains("owner_seeds")) c.owner_seeds = j["owner_seeds"].get<std::vector<uint64_t>>();
    if (j.contains("session_id")) {
      auto hex = j["session_id"].get<std::string>();
      if (hex.size() != 32) throw ValueError("config: session_id must be 32 hex chars");
      for (int i = 0; i < 16; ++i)
        c.session_id[i] = static_cast<uint8_t>(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
    }
    if (j.contains("csp_endpoints"))
      c.csp_endpoints = j["csp_endpoints"].get<std::vector<std::string>>();
    return c;
  }

  uint64_t digest() const {
    Fnv1a64 h;
    h.update_str(to_json().dump());
    return h.digest();
  }

  // Deterministic derivation of all seeds and the session id from one seed.
  static SessionConfig with_seed(SessionConfig base, uint64_t seed) {
    uint64_t s = seed;
    base.dealer_seed = splitmix64(s);
    base.owner_seeds.resize(base.n_owners);
    for (auto& os : base.owner_seeds) os = splitmix64(s);
    for (int i = 0; i < 16; i += 8) {
      uint64_t v = splitmix64(s);
      for (int b = 0; b < 8; ++b) base.session_id[i + b] = static_cast<uint8_t>(v >> (8 * b));
    }
    return base;
  }
};

// ---------------------------------------------------------------------------
// Leakage audit.

struct AuditReport {
  bool pass = true;
  std::vector<std::string> violations;
  size_t comparison_bits = 0;
  size_t inserted_records = 0;
  size_t masked_openings = 0;
};

// Checks that a finished session opened nothing beyond the declared
// leakage: every opening classified, inserted records matching the output
// structure one-to-one (the empty-set record may be pre-seeded), at most
// two comparison bits per scored candidate, everything else masked.
inline AuditReport transcript_audit(const Transcript& t, const PGStructure& pg,
                                    uint32_t candidates_scored) {
  AuditReport rep;
  auto fail = [&](const std::string& s) {
    rep.pass = false;
    rep.violations.push_back(s);
  };
  std::map<uint32_t, int> cmp_per_scope;
  std::map<uint32_t, int> ins_per_scope;
  std::vector<int64_t> inserted;

  for (size_t i = 0; i < t.entries.size(); ++i) {
    const auto& e = t.entries[i];
    std::string where = "entry " + std::to_string(i) + " (round " + std::to_string(e.round) +
                        ", gadget " + std::to_string(e.gadget) + ")";
    switch (e.opened.cls) {
      case LeakageClass::ComparisonBit:
        rep.comparison_bits++;
        cmp_per_scope[e.scope]++;
        if (e.scope == kScopeSetup) fail("comparison bit outside any candidate scope at " + where);
        if (e.opened.value.raw() > 1) fail("non-boolean comparison bit at " + where);
        break;
      case LeakageClass::InsertedRecord:
        rep.inserted_records++;
        ins_per_scope[e.scope]++;
        if (e.scope == kScopeSetup) fail("inserted record outside any candidate scope at " + where);
        inserted.push_back(static_cast<int64_t>(e.opened.value.signed_lift()));
        break;
      case LeakageClass::MaskedLookupIndex:
      case LeakageClass::MaskedComparisonValue:
        rep.masked_openings++;
        break;
      default:
        fail("unclassified opening at " + where);
    }
  }

  for (const auto& [scope, count] : cmp_per_scope) {
    if (scope != kScopeSetup && scope >= candidates_scored)
      fail("comparison bit in unknown scope " + std::to_string(scope));
    if (count > 2)
      fail("scope " + std::to_string(scope) + " opened " + std::to_string(count) +
           " comparison bits (max 2)");
  }
  for (const auto& [scope, count] : ins_per_scope)
    if (count > 1) fail("scope " + std::to_string(scope) + " inserted more than one record");

  size_t N = pg.records.size(), R = inserted.size();
  if (R > N) {
    fail("more inserted-record openings than output records");
  } else if (N - R > 1) {
    fail("output records lack inserted-record openings");
  } else {
    for (size_t i = 0; i < R; ++i)
      if (inserted[i] != pg.records[N - R + i].score2.mantissa)
        fail("inserted-record opening " + std::to_string(i) + " does not match the output");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Payload helpers.

namespace proto {

inline std::vector<uint8_t> encode_varset(int target, const VarSet& U) {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(target));
  w.u32(static_cast<uint32_t>(U.size()));
  for (int v : U) w.u32(static_cast<uint32_t>(v));
  return w.take();
}

inline std::pair<int, VarSet> decode_varset(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  int target = static_cast<int>(r.u32());
  uint32_t n = r.u32();
  VarSet U(n);
  for (auto& v : U) v = static_cast<int>(r.u32());
  if (!r.done()) throw ProtocolError("count request: trailing bytes");
  return {target, U};
}

inline std::vector<uint8_t> encode_fe_vector(std::span<const Fe> values) {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(values.size()));
  for (const Fe& v : values) w.bytes(v.to_bytes());
  return w.take();
}

inline std::vector<Fe> decode_fe_vector(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  uint32_t n = r.u32();
  std::vector<Fe> out(n);
  for (auto& v : out) v = Fe::from_bytes(r.bytes(16));
  if (!r.done()) throw ProtocolError("share vector: trailing bytes");
  return out;
}

inline std::vector<uint8_t> encode_pg(const PGStructure& pg) {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(pg.records.size()));
  for (const auto& rec : pg.records) {
    w.u32(static_cast<uint32_t>(rec.set.size()));
    for (int v : rec.set) w.u32(static_cast<uint32_t>(v));
    w.u64(static_cast<uint64_t>(rec.score2.mantissa));
  }
  return w.take();
}

inline PGStructure decode_pg(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  PGStructure pg;
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    ParentSetRecord rec;
    uint32_t k = r.u32();
    rec.set.resize(k);
    for (auto& v : rec.set) v = static_cast<int>(r.u32());
    rec.score2.mantissa = static_cast<int64_t>(r.u64());
    pg.records.push_back(std::move(rec));
  }
  if (!r.done()) throw ProtocolError("result: trailing bytes");
  return pg;
}

}  // namespace proto

// ---------------------------------------------------------------------------
// Secure scoring backend: realizes the lattice engine's scoring contract
// over shares. Per candidate it consumes per-owner count-share vectors,
// aggregates them locally, reads log values obliviously, and runs one
// Beaver product per cell. Only comparison bits and inserted records are
// ever opened in the clear.

class SecureBackend {
 public:
  using Handle = Engine::Sh;
  using CountProvider = std::function<std::vector<Fe>(const VarSet&)>;

  SecureBackend(Engine& engine, const SessionConfig& cfg, std::vector<Fe> log_table_fe,
                Handle log_m_share, CountProvider provider)
      : engine_(engine),
        cfg_(cfg),
        target_(cfg.target_index()),
        r_target_(cfg.schema.variables[target_].arity),
        log_fe_(std::move(log_table_fe)),
        log_m_(log_m_share),
        provider_(std::move(provider)) {}

  int n_vars() const { return cfg_.schema.n(); }
  int target() const { return target_; }
  uint32_t candidates_scored() const { return next_scope_; }

  Handle entropy2(const VarSet& U) { return entropy2_from_counts(provider_(U), U); }

  Handle score2(const VarSet& U) {
    Handle e2 = entropy2(U);
    return e2 + nc2_share(U);
  }

  Handle entropy2_full() {
    if (!have_full_) {
      VarSet full;
      for (int j = 0; j < cfg_.schema.n(); ++j)
        if (j != target_) full.push_back(j);
      h2_full_ = entropy2_from_counts(provider_(full), full);
      have_full_ = true;
    }
    return h2_full_;
  }

  Handle bound2(const VarSet& U) { return nc2_share(U) + entropy2_full(); }

  bool lt(Handle a, FixedPoint b) {
    return engine_.open_lt(a, engine_.from_public_i64(b.mantissa));
  }

  FixedPoint reveal(Handle s) {
    Fe v = engine_.open(s, LeakageClass::InsertedRecord);
    return fixed_from_fe(v, engine_.params());
  }

  void begin_candidate(const VarSet&) { engine_.set_scope(next_scope_++); }

  void sync_layer(int /*layer*/, uint64_t digest) { engine_.exchange_layer_digest(digest); }

 private:
  Handle nc2_share(const VarSet& U) {
    int64_t q = joint_states(cfg_.schema, U);
    Fe coeff = Fe::from_signed(static_cast<i128>(q) * (r_target_ - 1));
    return coeff * log_m_;
  }

  Handle entropy2_from_counts(std::vector<Fe> counts, const VarSet& U) {
    int64_t q = joint_states(cfg_.schema, U);
    size_t cells = static_cast<size_t>(q) * r_target_;
    if (counts.size() != cells) throw ProtocolError("count vector size mismatch");

    std::vector<Handle> idx;
    idx.reserve(q + cells);
    for (int64_t j = 0; j < q; ++j) {
      Handle nij{};
      for (int k = 0; k < r_target_; ++k) nij += counts[j * r_target_ + k];
      idx.push_back(nij);
    }
    idx.insert(idx.end(), counts.begin(), counts.end());
    auto logs = engine_.lookup_batch(idx, log_fe_);

    std::vector<Handle> diffs(cells);
    for (int64_t j = 0; j < q; ++j)
      for (int k = 0; k < r_target_; ++k)
        diffs[j * r_target_ + k] = logs[j] - logs[q + j * r_target_ + k];

    auto prods = engine_.mul_batch(counts, diffs);
    Handle acc{};
    for (const Handle& p : prods) acc += p;
    return acc + acc;  // doubled
  }

  Engine& engine_;
  const SessionConfig& cfg_;
  int target_;
  int r_target_;
  std::vector<Fe> log_fe_;
  Handle log_m_;
  CountProvider provider_;
  Handle h2_full_{};
  bool have_full_ = false;
  uint32_t next_scope_ = 0;
};

}  // namespace mps
