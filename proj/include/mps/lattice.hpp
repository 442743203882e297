#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mps/data.hpp"
#include "mps/scoring.hpp"

namespace mps {

struct ParentSetRecord {
  VarSet set;         // sorted, excludes the target
  FixedPoint score2;  // doubled MDL; for the empty set, doubled raw entropy

  bool operator==(const ParentSetRecord&) const = default;
};

// Output structure: insertion-ordered maximal parent sets. The empty set
// is always the first record; for any two records with V strictly inside
// U, score2(U) < score2(V) by construction.
struct PGStructure {
  std::vector<ParentSetRecord> records;

  bool operator==(const PGStructure&) const = default;
};

inline bool is_strict_subset(const VarSet& a, const VarSet& b) {
  return a.size() < b.size() && std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline bool is_subset(const VarSet& a, const VarSet& b) {
  return a.size() <= b.size() && std::includes(b.begin(), b.end(), a.begin(), a.end());
}

// Minimum recorded score over strict subsets of U. The empty record
// qualifies for every non-empty U, so the minimum always exists.
inline FixedPoint best_subset(const PGStructure& pg, const VarSet& U) {
  if (U.empty()) throw ValueError("best_subset: U must be non-empty");
  bool found = false;
  FixedPoint best{};
  for (const auto& rec : pg.records) {
    if (!is_strict_subset(rec.set, U)) continue;
    if (!found || rec.score2 < best) {
      best = rec.score2;
      found = true;
    }
  }
  if (!found) throw ValueError("best_subset: structure lacks the empty set");
  return best;
}

// Best recorded parent set drawn from the candidate pool C; ties keep the
// earliest insertion.
inline const ParentSetRecord& select_parents(const PGStructure& pg, const VarSet& C) {
  if (pg.records.empty()) throw ValueError("select_parents: empty structure");
  const ParentSetRecord* best = nullptr;
  for (const auto& rec : pg.records) {
    if (!is_subset(rec.set, C)) continue;
    if (best == nullptr || rec.score2 < best->score2) best = &rec;
  }
  if (best == nullptr) throw ValueError("select_parents: no eligible record");
  return *best;
}

enum class TraversalMode { Verbatim, Corrected };

inline std::string to_string(TraversalMode m) {
  return m == TraversalMode::Verbatim ? "verbatim" : "corrected";
}

inline TraversalMode traversal_mode_from_string(const std::string& s) {
  if (s == "verbatim") return TraversalMode::Verbatim;
  if (s == "corrected") return TraversalMode::Corrected;
  throw ValueError("unknown mode '" + s + "'");
}

inline uint64_t traversal_digest(int layer, const PGStructure& pg,
                                 const std::vector<VarSet>& frontier) {
  Fnv1a64 h;
  h.update_u64(static_cast<uint64_t>(layer));
  h.update_u64(pg.records.size());
  for (const auto& rec : pg.records) {
    h.update_u64(rec.set.size());
    for (int v : rec.set) h.update_u64(static_cast<uint64_t>(v));
    h.update_u64(static_cast<uint64_t>(rec.score2.mantissa));
  }
  h.update_u64(frontier.size());
  for (const auto& s : frontier) {
    h.update_u64(s.size());
    for (int v : s) h.update_u64(static_cast<uint64_t>(v));
  }
  return h.digest();
}

// Breadth-first subset-lattice traversal with bound-based pruning. The
// backend supplies scores and comparisons; this control flow is public and
// identical for the plaintext oracles and the secure protocol.
//
// Read verbatim, the pseudocode expands and inserts when s' <= w; since
// s = nc + H(Xi|U) >= nc + H_full = w, the insertion guard s < s' <= w <= s
// can never fire and the verbatim traversal only ever outputs the empty
// set. Corrected mode inverts the branch (expand when s' > w, ban the
// supersets otherwise), which is the condition consistent with a pruning
// bound: a set whose best subset already beats the bound cannot be
// improved on by any superset. Both modes are implemented; corrected is
// the default everywhere results matter.
template <class Backend>
PGStructure maximal_parent_sets(Backend& backend, int l_max, TraversalMode mode,
                                bool empty_set_penalty = false) {
  if (l_max < 0) throw ValueError("maximal_parent_sets: l_max must be >= 0");
  const int n = backend.n_vars();
  const int target = backend.target();

  backend.entropy2_full();  // line 1: H on the full candidate set

  PGStructure pg;
  backend.begin_candidate(VarSet{});
  auto h_empty = empty_set_penalty ? backend.score2(VarSet{}) : backend.entropy2(VarSet{});
  pg.records.push_back({VarSet{}, backend.reveal(h_empty)});

  std::vector<VarSet> frontier;
  for (int j = 0; j < n; ++j)
    if (j != target) frontier.push_back(VarSet{j});

  int layer = 1;
  while (!frontier.empty() && layer <= l_max) {
    std::vector<VarSet> queue = std::move(frontier);
    frontier.clear();
    std::vector<VarSet> next;
    std::vector<VarSet> banned;

    for (const auto& U : queue) {
      backend.begin_candidate(U);
      std::vector<VarSet> expansions;
      for (int j = 0; j < n; ++j) {
        if (j == target || std::binary_search(U.begin(), U.end(), j)) continue;
        VarSet sup = U;
        sup.insert(std::lower_bound(sup.begin(), sup.end(), j), j);
        expansions.push_back(std::move(sup));
      }

      auto s = backend.score2(U);
      FixedPoint s_prime = best_subset(pg, U);
      auto w = backend.bound2(U);

      bool bound_beaten = backend.lt(w, s_prime);  // public bit [w < s']
      bool expand = (mode == TraversalMode::Verbatim) ? !bound_beaten : bound_beaten;
      if (expand) {
        if (backend.lt(s, s_prime)) pg.records.push_back({U, backend.reveal(s)});
        for (auto& e : expansions) next.push_back(std::move(e));
      } else {
        for (auto& e : expansions) banned.push_back(std::move(e));
      }
    }

    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    std::sort(banned.begin(), banned.end());
    for (const auto& U : next)
      if (!std::binary_search(banned.begin(), banned.end(), U)) frontier.push_back(U);

    backend.sync_layer(layer, traversal_digest(layer, pg, frontier));
    ++layer;
  }
  return pg;
}

// Independent oracle: enumerate every candidate set up to l_max and keep
// those scoring strictly below all of their strict subsets. Shares only
// the quantized scoring functions with the engine, no pruning logic.
inline PGStructure brute_force_mps(const DataTable& table, const Schema& schema, int target,
                                   int l_max, const FieldParams& params,
                                   bool empty_set_penalty = false) {
  const int n = schema.n();
  if (n > 16) throw ValueError("brute_force_mps: too many variables to enumerate");
  LogTable logtab = build_log_table(schema.m_max, params.f);
  int64_t m = table.rows();

  std::vector<int> pool;
  for (int j = 0; j < n; ++j)
    if (j != target) pool.push_back(j);
  const int np = static_cast<int>(pool.size());
  const int max_card = std::min<int>(l_max, np);

  std::vector<int64_t> score_by_mask(static_cast<size_t>(1) << np, 0);
  std::vector<VarSet> set_by_mask(static_cast<size_t>(1) << np);
  std::vector<uint32_t> masks;
  for (uint32_t mask = 0; mask < (1u << np); ++mask) {
    if (__builtin_popcount(mask) > max_card) continue;
    VarSet U;
    for (int t = 0; t < np; ++t)
      if (mask & (1u << t)) U.push_back(pool[t]);
    auto c = contingency(table, schema, target, U);
    if (mask == 0 && !empty_set_penalty)
      score_by_mask[mask] = entropy2_fixed(c, logtab).mantissa;
    else
      score_by_mask[mask] = score2_fixed(c, m, logtab, params).mantissa;
    set_by_mask[mask] = std::move(U);
    masks.push_back(mask);
  }

  std::sort(masks.begin(), masks.end(), [&](uint32_t a, uint32_t b) {
    const auto& sa = set_by_mask[a];
    const auto& sb = set_by_mask[b];
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    return sa < sb;
  });

  PGStructure pg;
  for (uint32_t mask : masks) {
    bool maximal = true;
    if (mask != 0) {
      uint32_t sub = (mask - 1) & mask;
      for (;;) {
        if (!(score_by_mask[mask] < score_by_mask[sub])) {
          maximal = false;
          break;
        }
        if (sub == 0) break;
        sub = (sub - 1) & mask;
      }
    }
    if (maximal) pg.records.push_back({set_by_mask[mask], FixedPoint{score_by_mask[mask]}});
  }
  return pg;
}

// ---------------------------------------------------------------------------
// Plaintext scoring backends.

// Quantized oracle: integer mantissas from the shared log table. This is
// the ground truth that the secure path must reproduce bit-exactly.
class QuantizedBackend {
 public:
  using Handle = FixedPoint;

  QuantizedBackend(const DataTable& table, const Schema& schema, int target,
                   const FieldParams& params)
      : table_(table),
        schema_(schema),
        target_(target),
        params_(params),
        logtab_(build_log_table(schema.m_max, params.f)),
        m_(table.rows()) {
    if (m_ > schema.m_max) throw ValueError("backend: table larger than m_max");
  }

  int n_vars() const { return schema_.n(); }
  int target() const { return target_; }

  Handle entropy2(const VarSet& U) {
    return entropy2_fixed(contingency(table_, schema_, target_, U), logtab_);
  }
  Handle score2(const VarSet& U) {
    return score2_fixed(contingency(table_, schema_, target_, U), m_, logtab_, params_);
  }
  Handle entropy2_full() {
    if (!have_full_) {
      VarSet full;
      for (int j = 0; j < schema_.n(); ++j)
        if (j != target_) full.push_back(j);
      h2_full_ = entropy2(full);
      have_full_ = true;
    }
    return h2_full_;
  }
  Handle bound2(const VarSet& U) {
    int64_t q = joint_states(schema_, U);
    return FixedPoint{nc2_mantissa(q, schema_.variables[target_].arity, logtab_[m_]) +
                      entropy2_full().mantissa};
  }
  bool lt(Handle a, FixedPoint b) const { return a.mantissa < b.mantissa; }
  FixedPoint reveal(Handle s) const { return s; }
  void begin_candidate(const VarSet&) {}
  void sync_layer(int, uint64_t) {}

  const LogTable& log_table() const { return logtab_; }

 private:
  const DataTable& table_;
  const Schema& schema_;
  int target_;
  FieldParams params_;
  LogTable logtab_;
  int64_t m_;
  Handle h2_full_{};
  bool have_full_ = false;
};

// Double-precision reference. Revealed records are quantized on insertion
// so the structure type stays uniform; no bit-exactness claims attach to
// this path.
class FloatBackend {
 public:
  using Handle = double;  // doubled score

  FloatBackend(const DataTable& table, const Schema& schema, int target,
               const FieldParams& params)
      : table_(table), schema_(schema), target_(target), params_(params), m_(table.rows()) {
    if (m_ > schema.m_max) throw ValueError("backend: table larger than m_max");
  }

  int n_vars() const { return schema_.n(); }
  int target() const { return target_; }

  Handle entropy2(const VarSet& U) {
    return 2.0 * entropy_float(contingency(table_, schema_, target_, U));
  }
  Handle score2(const VarSet& U) {
    auto c = contingency(table_, schema_, target_, U);
    return 2.0 * mdl_score_float(c, m_);
  }
  Handle entropy2_full() {
    if (!have_full_) {
      VarSet full;
      for (int j = 0; j < schema_.n(); ++j)
        if (j != target_) full.push_back(j);
      h2_full_ = entropy2(full);
      have_full_ = true;
    }
    return h2_full_;
  }
  Handle bound2(const VarSet& U) {
    double q = static_cast<double>(joint_states(schema_, U));
    double nc2 = q * (schema_.variables[target_].arity - 1) * std::log(static_cast<double>(m_));
    return nc2 + entropy2_full();
  }
  bool lt(Handle a, FixedPoint b) const { return a < fp_decode(b, params_.f); }
  FixedPoint reveal(Handle s) const { return fp_encode(s, params_); }
  void begin_candidate(const VarSet&) {}
  void sync_layer(int, uint64_t) {}

 private:
  const DataTable& table_;
  const Schema& schema_;
  int target_;
  FieldParams params_;
  int64_t m_;
  Handle h2_full_ = 0.0;
  bool have_full_ = false;
};

// ---------------------------------------------------------------------------

inline nlohmann::ordered_json pg_to_json(const PGStructure& pg, const Schema& schema,
                                         int target, TraversalMode mode, int f) {
  nlohmann::ordered_json j;
  j["target"] = schema.variables[target].name;
  j["mode"] = to_string(mode);
  j["f"] = f;
  j["records"] = nlohmann::ordered_json::array();
  for (const auto& rec : pg.records) {
    nlohmann::ordered_json jr;
    jr["set"] = nlohmann::ordered_json::array();
    for (int v : rec.set) jr["set"].push_back(schema.variables[v].name);
    jr["score2_mantissa"] = rec.score2.mantissa;
    jr["score"] = std::ldexp(static_cast<double>(rec.score2.mantissa), -(f + 1));
    j["records"].push_back(jr);
  }
  return j;
}

}  // namespace mps
