#include <boost/multiprecision/cpp_int.hpp>

#include "catch_amalgamated.hpp"
#include "mps/field.hpp"
#include "mps/fixed_point.hpp"
#include "mps/prg.hpp"

using mps::Fe;
using mps::FieldParams;
using mps::FixedPoint;

namespace {

using big = boost::multiprecision::cpp_int;

big to_big(mps::u128 v) {
  return (big(static_cast<uint64_t>(v >> 64)) << 64) | big(static_cast<uint64_t>(v));
}

const big kP = (big(1) << 127) - 1;

}  // anonymous namespace

TEST_CASE("field arithmetic basics") {
  Fe p_minus_1 = Fe::from_raw(Fe::modulus() - 1);
  CHECK((p_minus_1 + Fe::from_u64(1)).raw() == 0);  // wraparound
  Fe x = Fe::from_u64(123456789);
  CHECK(x * Fe::from_u64(1) == x);
  CHECK((Fe::from_u64(3) * Fe::from_u64(4)).raw() == 12);
  CHECK((x - x).raw() == 0);
  CHECK((-Fe::from_u64(0)).raw() == 0);
  CHECK(((-x) + x).raw() == 0);
}

TEST_CASE("signed lift") {
  CHECK(Fe::from_u64(0).signed_lift() == 0);
  CHECK(Fe::from_raw(Fe::modulus() - 5).signed_lift() == -5);
  CHECK(Fe::from_u64(7).signed_lift() == 7);
  CHECK(Fe::from_signed(-42).signed_lift() == -42);
}

TEST_CASE("signed lift negation symmetry") {
  mps::Prg rng(7);
  for (int i = 0; i < 1000; ++i) {
    auto v = static_cast<int64_t>(rng.next_u64() >> 20);
    Fe x = Fe::from_signed(v);
    CHECK((-x).signed_lift() == -x.signed_lift());
  }
}

TEST_CASE("field matches wide-integer reference on random operands") {
  mps::Prg rng(2024);
  for (int i = 0; i < 100000; ++i) {
    Fe a = rng.next_fe(), b = rng.next_fe();
    big ba = to_big(a.raw()), bb = to_big(b.raw());
    CHECK(to_big((a + b).raw()) == (ba + bb) % kP);
    CHECK(to_big((a - b).raw()) == ((ba - bb) % kP + kP) % kP);
    CHECK(to_big((a * b).raw()) == (ba * bb) % kP);
    CHECK(to_big((-a).raw()) == (kP - ba) % kP);
  }
}

TEST_CASE("field serialization is 16-byte little-endian") {
  Fe one = Fe::from_u64(1);
  auto bytes = one.to_bytes();
  CHECK(bytes[0] == 1);
  for (int i = 1; i < 16; ++i) CHECK(bytes[i] == 0);
  mps::Prg rng(5);
  for (int i = 0; i < 100; ++i) {
    Fe x = rng.next_fe();
    CHECK(Fe::from_bytes(x.to_bytes()) == x);
  }
  std::array<uint8_t, 16> all_ones;
  all_ones.fill(0xff);
  all_ones[15] = 0x7f;  // value p itself, non-canonical
  CHECK_THROWS_AS(Fe::from_bytes(all_ones), mps::ProtocolError);
}

TEST_CASE("fixed point encode/decode") {
  FieldParams params;
  CHECK(fp_encode(0.0, params).mantissa == 0);
  CHECK(fp_encode(1.0, params).mantissa == 65536);
  CHECK(fp_encode(std::log(2.0), params).mantissa == 45426);
  CHECK(fp_decode(FixedPoint{65536}, params.f) == 1.0);
  CHECK_THROWS_AS(fp_encode(std::ldexp(1.0, 40), params), mps::ValueError);

  mps::Prg rng(11);
  for (int i = 0; i < 2000; ++i) {
    double a = static_cast<double>(static_cast<int64_t>(rng.next_u64() >> 34)) / 1024.0 - 1024.0;
    double b = static_cast<double>(static_cast<int64_t>(rng.next_u64() >> 34)) / 1024.0 - 1024.0;
    auto ea = fp_encode(a, params), eb = fp_encode(b, params);
    double sum = fp_decode(FixedPoint{ea.mantissa + eb.mantissa}, params.f);
    CHECK(std::fabs(sum - (a + b)) <= std::ldexp(1.0, -params.f));
  }
}

TEST_CASE("fixed point round-half-even") {
  FieldParams params;
  params.f = 1;  // scale 2: halves land exactly on .5 boundaries
  CHECK(fp_encode(0.25, params).mantissa == 0);   // 0.5 rounds to even 0
  CHECK(fp_encode(0.75, params).mantissa == 2);   // 1.5 rounds to even 2
  CHECK(fp_encode(1.25, params).mantissa == 2);   // 2.5 rounds to even 2
  CHECK(fp_encode(-0.25, params).mantissa == 0);
  CHECK(fp_encode(-0.75, params).mantissa == -2);
}

TEST_CASE("field params validation") {
  FieldParams params;
  CHECK_NOTHROW(params.validate());
  params.K = 80;
  params.sigma = 50;
  CHECK_THROWS_AS(params.validate(), mps::ValueError);
  params = FieldParams{};
  params.f = 0;
  CHECK_THROWS_AS(params.validate(), mps::ValueError);
}
