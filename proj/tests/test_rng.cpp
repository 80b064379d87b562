#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "fairfal/rng.hpp"

using namespace fairfal;

TEST_CASE("stream seeds are stable and sensitive to every input") {
  const auto a = stream_seed(42, "purpose", {1, 2});
  CHECK(a == stream_seed(42, "purpose", {1, 2}));
  CHECK(a != stream_seed(43, "purpose", {1, 2}));
  CHECK(a != stream_seed(42, "other", {1, 2}));
  CHECK(a != stream_seed(42, "purpose", {1, 3}));
  CHECK(a != stream_seed(42, "purpose", {2, 1}));
}

TEST_CASE("uniform stays in [0,1) and is deterministic") {
  Rng a(7), b(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
  }
}

TEST_CASE("uniform_index covers the range without bias at the edges") {
  Rng rng(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) seen.insert(rng.uniform_index(7));
  CHECK(seen.size() == 7);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 6);
  CHECK_THROWS_AS(rng.uniform_index(0), std::invalid_argument);
}

TEST_CASE("normal moments are roughly standard") {
  Rng rng(11);
  const int n = 20000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum2 += x * x;
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(std::abs(sum2 / n - 1.0) < 0.05);
}

TEST_CASE("gamma matches mean/variance of the target distribution") {
  Rng rng(13);
  for (double shape : {0.3, 1.0, 2.5, 8.0}) {
    const int n = 20000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = rng.gamma(shape);
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(mean == Catch::Approx(shape).margin(0.1 * shape + 0.02));
    CHECK(var == Catch::Approx(shape).margin(0.2 * shape + 0.05));
  }
  CHECK_THROWS_AS(rng.gamma(0.0), std::invalid_argument);
}

TEST_CASE("dirichlet proportions sum to one and concentrate with alpha") {
  Rng rng(17);
  double spread_small = 0.0, spread_large = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto p_small = rng.dirichlet(0.1, 10);
    const auto p_large = rng.dirichlet(100.0, 10);
    double s1 = 0.0, s2 = 0.0;
    for (double v : p_small) s1 += v;
    for (double v : p_large) s2 += v;
    CHECK(s1 == Catch::Approx(1.0).epsilon(1e-9));
    CHECK(s2 == Catch::Approx(1.0).epsilon(1e-9));
    for (double v : p_small) spread_small += std::abs(v - 0.1);
    for (double v : p_large) spread_large += std::abs(v - 0.1);
  }
  CHECK(spread_small > 5.0 * spread_large);
}

TEST_CASE("sample_without_replacement returns sorted distinct values") {
  Rng rng(19);
  const auto s = rng.sample_without_replacement(50, 20);
  REQUIRE(s.size() == 20);
  CHECK(std::is_sorted(s.begin(), s.end()));
  CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
  CHECK(s.front() >= 0);
  CHECK(s.back() < 50);
  CHECK_THROWS_AS(rng.sample_without_replacement(3, 4), std::invalid_argument);

  // Full sample is the identity set.
  Rng rng2(19);
  const auto full = rng2.sample_without_replacement(5, 5);
  CHECK(full == std::vector<int>{0, 1, 2, 3, 4});
}
