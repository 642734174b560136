#include <catch2/catch_amalgamated.hpp>

#include "heatsdf/rng.hpp"

using namespace heatsdf;

TEST_CASE("counter rng is reproducible and stream-independent") {
  CounterRng a(42, 3), b(42, 3), c(42, 4);
  bool streams_differ = false;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t va = a.next_u64();
    REQUIRE(va == b.next_u64());
    if (va != c.next_u64()) streams_differ = true;
  }
  CHECK(streams_differ);
}

TEST_CASE("uniform draws have the right range and mean") {
  CounterRng rng(7);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_double();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // 3 sigma for the mean of n uniforms: 3 / sqrt(12 n)
  CHECK(std::abs(sum / n - 0.5) < 3.0 / std::sqrt(12.0 * n));
}

TEST_CASE("open-interval draws avoid the endpoints and domain points stay interior") {
  CounterRng rng(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_open();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(inside_domain(rng.next_in_domain()));
  }
}

TEST_CASE("normal draws have approximately unit variance") {
  CounterRng rng(13);
  double sum = 0.0, sq = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(std::abs(sq / n - 1.0) < 0.03);
}
