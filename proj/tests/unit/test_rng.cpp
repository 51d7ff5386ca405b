#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "survsel/rng.hpp"

using namespace survsel;

TEST_CASE("same seed reproduces the sequence") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int differ = 0;
  for (int i = 0; i < 32; ++i)
    if (a.next_u64() != b.next_u64()) ++differ;
  CHECK(differ > 0);
}

TEST_CASE("uniform01 stays in the half-open unit interval") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform respects its bounds") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-2.5, 4.0);
    CHECK(v >= -2.5);
    CHECK(v < 4.0);
  }
}

TEST_CASE("uniform_below covers every residue and respects the bound") {
  Rng rng(5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t v = rng.uniform_below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  for (int i = 0; i < 16; ++i) CHECK(rng.uniform_below(1) == 0);
}

TEST_CASE("bernoulli edge probabilities are exact") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    CHECK_FALSE(rng.bernoulli(0.0));
    CHECK(rng.bernoulli(1.0));
  }
}

TEST_CASE("normal draws have roughly standard moments") {
  Rng rng(17);
  const int n = 50000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("shuffle produces a permutation and is seed-stable") {
  std::vector<std::size_t> v(50);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  std::vector<std::size_t> a = v, b = v;
  Rng r1(9), r2(9);
  r1.shuffle(a);
  r2.shuffle(b);
  CHECK(a == b);
  std::sort(a.begin(), a.end());
  CHECK(a == v);
}

TEST_CASE("permutation rearranges exactly the first n integers") {
  Rng rng(21);
  const auto p = rng.permutation(64);
  CHECK(p.size() == 64);
  std::set<std::size_t> unique(p.begin(), p.end());
  CHECK(unique.size() == 64);
  CHECK(*unique.begin() == 0);
  CHECK(*unique.rbegin() == 63);
}

TEST_CASE("derive_seed is a pure function of its arguments") {
  CHECK(derive_seed(1, "alpha", 2, 3) == derive_seed(1, "alpha", 2, 3));
  CHECK(derive_seed(1, "alpha", 2, 3) != derive_seed(1, "beta", 2, 3));
  CHECK(derive_seed(1, "alpha", 2, 3) != derive_seed(2, "alpha", 2, 3));
  CHECK(derive_seed(1, "alpha", 2, 3) != derive_seed(1, "alpha", 3, 2));
  CHECK(derive_seed(1, "alpha") == derive_seed(1, "alpha", 0, 0));
}

TEST_CASE("streams from different derived seeds look independent") {
  Rng a(derive_seed(42, "one"));
  Rng b(derive_seed(42, "two"));
  int equal = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() == b.next_u64()) ++equal;
  CHECK(equal == 0);
}
