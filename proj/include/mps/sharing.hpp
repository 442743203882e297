#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mps/field.hpp"
#include "mps/prg.hpp"

namespace mps {

// One party's additive share of a secret. The beta shares of x satisfy
// sum(values) == x (mod p); any beta-1 of them are jointly uniform.
struct AdditiveShare {
  int party = 0;
  Fe value;
};

inline std::vector<AdditiveShare> share(Fe x, int beta, Prg& rng) {
  if (beta < 2) throw ValueError("share: need at least 2 parties");
  std::vector<AdditiveShare> out;
  out.reserve(beta);
  Fe sum;
  for (int i = 0; i < beta - 1; ++i) {
    Fe r = rng.next_fe();
    sum += r;
    out.push_back({i, r});
  }
  out.push_back({beta - 1, x - sum});
  return out;
}

inline Fe reconstruct(std::span<const AdditiveShare> shares) {
  if (shares.size() < 2) throw ValueError("reconstruct: need at least 2 shares");
  uint64_t seen = 0;
  Fe sum;
  for (const auto& s : shares) {
    if (s.party < 0 || s.party >= static_cast<int>(shares.size()))
      throw ValueError("reconstruct: party index out of range");
    uint64_t bit = 1ULL << s.party;
    if (seen & bit) throw ValueError("reconstruct: duplicate party index");
    seen |= bit;
    sum += s.value;
  }
  return sum;
}

// Share of sum(coeff_i * x_i) + constant, computed locally. The public
// constant is contributed by party 0 only so the shares still sum to the
// right secret.
inline AdditiveShare local_lincomb(std::span<const std::pair<Fe, AdditiveShare>> terms,
                                   Fe constant) {
  if (terms.empty()) throw ValueError("local_lincomb: no terms");
  int party = terms.front().second.party;
  Fe acc;
  for (const auto& [coeff, sh] : terms) {
    if (sh.party != party) throw ValueError("local_lincomb: mixed party indices");
    acc += coeff * sh.value;
  }
  if (party == 0) acc += constant;
  return {party, acc};
}

// Share-vector helper used by data owners: party i < beta-1 receives PRG
// output, the last party the adjusted value.
inline std::vector<std::vector<Fe>> share_vector(std::span<const Fe> values, int beta, Prg& rng) {
  if (beta < 2) throw ValueError("share_vector: need at least 2 parties");
  std::vector<std::vector<Fe>> out(beta);
  for (auto& v : out) v.reserve(values.size());
  for (Fe x : values) {
    Fe sum;
    for (int i = 0; i < beta - 1; ++i) {
      Fe r = rng.next_fe();
      sum += r;
      out[i].push_back(r);
    }
    out[beta - 1].push_back(x - sum);
  }
  return out;
}

}  // namespace mps
