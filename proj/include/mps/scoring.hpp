#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mps/data.hpp"
#include "mps/fixed_point.hpp"

namespace mps {

// Quantized natural logs of the integers 0..m_max. T[0] = 0 by convention:
// it is only ever multiplied by a zero count, which makes the x log x = 0
// convention structural — no branch needed on the secure path.
struct LogTable {
  int f = 16;
  std::vector<int64_t> t;

  int64_t operator[](int64_t x) const { return t[x]; }
  int64_t size() const { return static_cast<int64_t>(t.size()); }
};

inline LogTable build_log_table(int64_t m_max, int f) {
  if (m_max < 1) throw ValueError("log table: m_max must be >= 1");
  LogTable lt;
  lt.f = f;
  lt.t.resize(m_max + 1);
  lt.t[0] = 0;
  for (int64_t x = 1; x <= m_max; ++x)
    lt.t[x] = std::llrint(std::ldexp(std::log(static_cast<double>(x)), f));
  return lt;
}

// Float reference: H(X_i | U) = sum over cells of N_ijk * (ln N_ij - ln N_ijk),
// zero-count terms contributing 0.
inline double entropy_float(const ContingencyVector& c) {
  double h = 0.0;
  for (int64_t j = 0; j < c.q; ++j) {
    int64_t nij = c.n_ij(j);
    if (nij == 0) continue;
    double log_nij = std::log(static_cast<double>(nij));
    for (int k = 0; k < c.r_target; ++k) {
      int64_t nijk = c.n_ijk(j, k);
      if (nijk == 0) continue;
      h += static_cast<double>(nijk) * (log_nij - std::log(static_cast<double>(nijk)));
    }
  }
  return h;
}

inline double mdl_score_float(const ContingencyVector& c, int64_t m) {
  double nc = 0.5 * static_cast<double>(c.q) * std::log(static_cast<double>(m)) *
              (c.r_target - 1);
  return entropy_float(c) + nc;
}

// Doubled quantized conditional entropy: 2 * sum N_ijk (T[N_ij] - T[N_ijk]).
// Pure integer arithmetic; the only rounding lives in the table itself, so
// this is bit-reproducible and is exactly what the secure path computes.
inline FixedPoint entropy2_fixed(const ContingencyVector& c, const LogTable& table) {
  int64_t acc = 0;
  for (int64_t j = 0; j < c.q; ++j) {
    int64_t nij = c.n_ij(j);
    for (int k = 0; k < c.r_target; ++k) {
      int64_t nijk = c.n_ijk(j, k);
      acc += nijk * (table[nij] - table[nijk]);
    }
  }
  return FixedPoint{2 * acc};
}

inline int64_t nc2_mantissa(int64_t q, int r_target, int64_t log_m_mantissa) {
  return q * (r_target - 1) * log_m_mantissa;
}

// Doubled quantized MDL: 2H + q_U (r_i - 1) T[m].
inline FixedPoint score2_fixed(const ContingencyVector& c, int64_t m, const LogTable& table,
                               const FieldParams& params) {
  if (m > table.size() - 1) throw ValueError("score2: m exceeds the log table range");
  if (c.total() != m && !(m == 0 && c.total() == 0))
    throw ValueError("score2: counts inconsistent with m");
  int64_t mant = entropy2_fixed(c, table).mantissa + nc2_mantissa(c.q, c.r_target, table[m]);
  if (std::abs(mant) >= (static_cast<int64_t>(1) << params.K))
    throw ValueError("score2: mantissa exceeds 2^K");
  return FixedPoint{mant};
}

// Largest doubled-score mantissa a session can produce, used to validate
// that comparisons stay inside the 2^K window. q_max is the largest joint
// state count of any candidate set the traversal may score.
inline int64_t score2_magnitude_bound(int64_t m_max, int64_t q_max, int r_target,
                                      const LogTable& table) {
  return 2 * m_max * table[m_max] + nc2_mantissa(q_max, r_target, table[m_max]);
}

}  // namespace mps
