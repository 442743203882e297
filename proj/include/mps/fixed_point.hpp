#pragma once

#include <cmath>
#include <cstdint>

#include "mps/field.hpp"
#include "mps/util.hpp"

namespace mps {

// Real values (entropies, scores) carried as mantissa / 2^f. Scores are
// always the doubled MDL so the 0.5 penalty factor stays integral and no
// field division is ever needed; doubling is monotone, so comparisons and
// argmin are unaffected.
struct FixedPoint {
  int64_t mantissa = 0;

  bool operator==(const FixedPoint&) const = default;
  auto operator<=>(const FixedPoint&) const = default;
};

// Round-half-to-even quantization, fixed so the plaintext oracle and the
// secure path agree bit-exactly.
inline FixedPoint fp_encode(double r, const FieldParams& params) {
  double scaled = std::ldexp(r, params.f);
  if (!(std::fabs(scaled) < std::ldexp(1.0, params.K)))
    throw ValueError("fp_encode: value exceeds 2^K magnitude bound");
  // llrint honours the default to-nearest-even rounding mode.
  return FixedPoint{std::llrint(scaled)};
}

inline double fp_decode(FixedPoint x, int f) { return std::ldexp(static_cast<double>(x.mantissa), -f); }

inline Fe fe_from_fixed(FixedPoint x) { return Fe::from_signed(x.mantissa); }

inline FixedPoint fixed_from_fe(Fe v, const FieldParams& params) {
  i128 lifted = v.signed_lift();
  i128 bound = static_cast<i128>(1) << (params.K + 1);
  if (lifted >= bound || lifted <= -bound)
    throw ValueError("fixed_from_fe: lifted value exceeds 2^(K+1)");
  return FixedPoint{static_cast<int64_t>(lifted)};
}

}  // namespace mps
