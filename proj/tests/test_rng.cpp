#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "clipscope/rng.hpp"

using namespace clipscope;

TEST_CASE("raw stream is the standard mt19937_64 sequence") {
  Rng r(5489);
  std::mt19937_64 ref(5489);
  for (int i = 0; i < 1000; ++i) REQUIRE(r.next() == ref());
  // 10000th output of the default-seeded engine, fixed by the C++ standard
  std::mt19937_64 std_engine;
  Rng d(5489);
  for (int i = 0; i < 9999; ++i) d.next();
  CHECK(d.next() == 9981545732273789042ULL);
}

TEST_CASE("below stays in range and covers every residue") {
  Rng r(1);
  for (std::uint64_t n : {1ULL, 2ULL, 3ULL, 7ULL, 1000ULL, (1ULL << 63) + 5}) {
    for (int i = 0; i < 1000; ++i) REQUIRE(r.below(n) < n);
  }
  std::vector<int> hits(6, 0);
  for (int i = 0; i < 60000; ++i) ++hits[r.below(6)];
  for (int h : hits) CHECK(std::abs(h - 10000) < 500);
}

TEST_CASE("uniform and normal moments") {
  Rng r(2);
  double s = 0.0, lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    s += u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(s / 100000 == doctest::Approx(0.5).epsilon(0.01));

  double m = 0.0, m2 = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double z = r.normal();
    m += z;
    m2 += z * z;
  }
  CHECK(std::fabs(m / 200000) < 0.01);
  CHECK(m2 / 200000 == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> base(50);
  std::iota(base.begin(), base.end(), 0);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto a = base, b = base;
    Rng ra(seed), rb(seed);
    shuffle(std::span<int>(a), ra);
    shuffle(std::span<int>(b), rb);
    REQUIRE(a == b);
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    REQUIRE(sorted == base);
  }
  auto a = base, b = base;
  Rng ra(1), rb(2);
  shuffle(std::span<int>(a), ra);
  shuffle(std::span<int>(b), rb);
  CHECK(a != b);
}

TEST_CASE("shuffle positions are uniform") {
  // each element lands in each of 4 slots about 1/4 of the time
  int counts[4][4] = {};
  Rng r(9);
  for (int t = 0; t < 40000; ++t) {
    int v[4] = {0, 1, 2, 3};
    shuffle(std::span<int>(v), r);
    for (int p = 0; p < 4; ++p) ++counts[v[p]][p];
  }
  for (auto& row : counts)
    for (int c : row) CHECK(std::abs(c - 10000) < 400);
}
