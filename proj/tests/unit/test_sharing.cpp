#include <cmath>

#include "catch_amalgamated.hpp"
#include "mps/data.hpp"
#include "mps/material.hpp"
#include "mps/sharing.hpp"

using mps::AdditiveShare;
using mps::Fe;
using mps::Prg;

TEST_CASE("share/reconstruct round trip") {
  Prg rng(1);
  auto shares = mps::share(Fe::from_u64(7), 3, rng);
  REQUIRE(shares.size() == 3);
  CHECK(mps::reconstruct(shares).raw() == 7);

  auto zero = mps::share(Fe::from_u64(0), 3, rng);
  CHECK(mps::reconstruct(zero).raw() == 0);

  for (int i = 0; i < 10000; ++i) {
    Fe x = rng.next_fe();
    int beta = 2 + static_cast<int>(rng.next_below(5));
    auto sh = mps::share(x, beta, rng);
    CHECK(mps::reconstruct(sh) == x);
  }
}

TEST_CASE("share determinism under a fixed seed") {
  Prg a(42), b(42);
  auto s1 = mps::share(Fe::from_u64(99), 4, a);
  auto s2 = mps::share(Fe::from_u64(99), 4, b);
  for (int i = 0; i < 4; ++i) CHECK(s1[i].value == s2[i].value);
}

TEST_CASE("share/reconstruct input validation") {
  Prg rng(2);
  CHECK_THROWS_AS(mps::share(Fe::from_u64(1), 1, rng), mps::ValueError);

  auto shares = mps::share(Fe::from_u64(5), 3, rng);
  shares[1].party = 0;  // duplicate
  CHECK_THROWS_AS(mps::reconstruct(shares), mps::ValueError);
  shares[1].party = 5;  // out of range
  CHECK_THROWS_AS(mps::reconstruct(shares), mps::ValueError);
}

TEST_CASE("reconstruct of explicit shares") {
  std::vector<AdditiveShare> shares = {{0, Fe::from_u64(3)}, {1, Fe::from_u64(4)},
                                       {2, Fe::from_u64(5)}};
  CHECK(mps::reconstruct(shares).raw() == 12);
  std::vector<AdditiveShare> wrap = {{0, Fe::from_raw(Fe::modulus() - 1)}, {1, Fe::from_u64(1)}};
  CHECK(mps::reconstruct(wrap).raw() == 0);
}

TEST_CASE("local lincomb") {
  Prg rng(3);
  auto sh2 = mps::share(Fe::from_u64(2), 3, rng);
  auto sh3 = mps::share(Fe::from_u64(3), 3, rng);

  std::vector<AdditiveShare> combined(3);
  for (int p = 0; p < 3; ++p) {
    std::vector<std::pair<Fe, AdditiveShare>> terms = {{Fe::from_u64(1), sh2[p]},
                                                       {Fe::from_u64(1), sh3[p]}};
    combined[p] = mps::local_lincomb(terms, Fe{});
  }
  CHECK(mps::reconstruct(combined).raw() == 5);

  // zero coefficients leave only the public constant
  for (int p = 0; p < 3; ++p) {
    std::vector<std::pair<Fe, AdditiveShare>> terms = {{Fe{}, sh2[p]}};
    combined[p] = mps::local_lincomb(terms, Fe::from_u64(17));
  }
  CHECK(mps::reconstruct(combined).raw() == 17);

  std::vector<std::pair<Fe, AdditiveShare>> mixed = {{Fe::from_u64(1), sh2[0]},
                                                     {Fe::from_u64(1), sh3[1]}};
  CHECK_THROWS_AS(mps::local_lincomb(mixed, Fe{}), mps::ValueError);
}

TEST_CASE("linearity against reconstructed secrets") {
  Prg rng(4);
  for (int iter = 0; iter < 200; ++iter) {
    Fe x = rng.next_fe(), y = rng.next_fe(), c1 = rng.next_fe(), c2 = rng.next_fe(),
       cst = rng.next_fe();
    auto shx = mps::share(x, 3, rng);
    auto shy = mps::share(y, 3, rng);
    std::vector<AdditiveShare> combined(3);
    for (int p = 0; p < 3; ++p) {
      std::vector<std::pair<Fe, AdditiveShare>> terms = {{c1, shx[p]}, {c2, shy[p]}};
      combined[p] = mps::local_lincomb(terms, cst);
    }
    CHECK(mps::reconstruct(combined) == c1 * x + c2 * y + cst);
  }
}

TEST_CASE("summing cell shares reconstructs the row-group counts") {
  // N_ij recovered from N_ijk shares purely locally, checked against the
  // plaintext contingency sums.
  mps::Schema schema = mps::schema_from_json(nlohmann::json::parse(R"({
    "variables": [
      {"name": "A", "arity": 2}, {"name": "B", "arity": 3}, {"name": "Y", "arity": 2}
    ], "m_max": 64})"));
  Prg rng(5);
  mps::DataTable table;
  table.n_vars = 3;
  for (int i = 0; i < 40; ++i) {
    std::vector<uint8_t> row = {static_cast<uint8_t>(rng.next_below(2)),
                                static_cast<uint8_t>(rng.next_below(3)),
                                static_cast<uint8_t>(rng.next_below(2))};
    table.append_row(row);
  }
  auto c = mps::contingency(table, schema, 2, {0, 1});
  std::vector<Fe> counts(c.counts.size());
  for (size_t i = 0; i < counts.size(); ++i) counts[i] = Fe::from_u64(c.counts[i]);
  auto vecs = mps::share_vector(counts, 3, rng);

  for (int64_t j = 0; j < c.q; ++j) {
    std::vector<AdditiveShare> nij(3);
    for (int p = 0; p < 3; ++p) {
      std::vector<std::pair<Fe, AdditiveShare>> terms;
      for (int k = 0; k < c.r_target; ++k)
        terms.push_back({Fe::from_u64(1), {p, vecs[p][j * c.r_target + k]}});
      nij[p] = mps::local_lincomb(terms, Fe{});
    }
    CHECK(mps::reconstruct(nij).raw() == static_cast<mps::u128>(c.n_ij(j)));
  }
}

TEST_CASE("dealer material invariants") {
  const uint64_t seed = 99;
  const int beta = 3;

  auto triple = mps::dealer::make_triple(seed, 0, beta);
  Fe a, b, c;
  for (int p = 0; p < beta; ++p) {
    a += triple[p].a;
    b += triple[p].b;
    c += triple[p].c;
  }
  CHECK(c == a * b);

  auto lookup = mps::dealer::make_lookup(seed, 0, beta, 8);
  Fe r;
  for (int p = 0; p < beta; ++p) r += lookup[p].r;
  REQUIRE(r.raw() < 8);
  int ones = 0;
  for (uint32_t j = 0; j < 8; ++j) {
    Fe e;
    for (int p = 0; p < beta; ++p) e += lookup[p].onehot[j];
    if (j == static_cast<uint32_t>(r.raw())) {
      CHECK(e.raw() == 1);
      ++ones;
    } else {
      CHECK(e.raw() == 0);
    }
  }
  CHECK(ones == 1);

  const int K = 40, sigma = 40;
  auto cmp = mps::dealer::make_cmp(seed, 0, beta, K, sigma);
  Fe mask;
  for (int p = 0; p < beta; ++p) mask += cmp[p].mask;
  mps::u128 low = 0;
  for (int j = 0; j <= K; ++j) {
    Fe bit;
    for (int p = 0; p < beta; ++p) bit += cmp[p].bits[j];
    REQUIRE(bit.raw() <= 1);
    low |= bit.raw() << j;
  }
  mps::u128 mod = static_cast<mps::u128>(1) << (K + 1);
  CHECK(low == mask.raw() % mod);
  CHECK(mask.raw() < (static_cast<mps::u128>(1) << (K + 1 + sigma)));
}

TEST_CASE("dealer derivation is deterministic and index-separated") {
  auto t1 = mps::dealer::make_triple(7, 5, 2);
  auto t2 = mps::dealer::make_triple(7, 5, 2);
  CHECK(t1[0].a == t2[0].a);
  auto t3 = mps::dealer::make_triple(7, 6, 2);
  CHECK(t1[0].a != t3[0].a);  // overwhelmingly likely distinct
}

TEST_CASE("share marginals look uniform (KS smoke)") {
  // Kolmogorov-Smirnov smoke test at alpha = 0.001 on each fixed party's
  // marginal for a constant secret.
  const int n = 10000;
  Prg rng(123);
  Fe secret = Fe::from_u64(424242);
  for (int coord = 0; coord < 2; ++coord) {
    std::vector<double> samples;
    samples.reserve(n);
    Prg local(123 + coord);
    for (int i = 0; i < n; ++i) {
      auto sh = mps::share(secret, 3, local);
      double u = static_cast<double>(sh[coord].value.raw() >> 64) /
                 static_cast<double>(Fe::modulus() >> 64);
      samples.push_back(std::min(u, 1.0));
    }
    std::sort(samples.begin(), samples.end());
    double d = 0;
    for (int i = 0; i < n; ++i) {
      double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
      d = std::max({d, std::fabs(samples[i] - lo), std::fabs(samples[i] - hi)});
    }
    double crit = 1.94947 / std::sqrt(static_cast<double>(n));  // alpha = 0.001
    CHECK(d < crit);
  }
}
