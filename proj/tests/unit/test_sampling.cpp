#include <catch2/catch_amalgamated.hpp>

#include "heatsdf/sampling.hpp"

using namespace heatsdf;

TEST_CASE("volume estimator is exact for constant integrands") {
  CounterRng rng(1);
  const VolumeBatch b = sample_volume(rng, 100);
  CHECK(b.volume == 2.4 * 2.4 * 2.4);
  double mean = 0.0;
  for (const Vec3& p : b.points) {
    REQUIRE(inside_domain(p));
    mean += 1.0;
  }
  mean /= 100.0;
  CHECK(b.volume * mean == b.volume);
}

TEST_CASE("volume estimator of an odd integrand is near zero") {
  CounterRng rng(2);
  const std::size_t n = 1000000;
  VolumeBatch b = sample_volume(rng, n);
  double mean = 0.0;
  for (const Vec3& p : b.points) mean += p.x;
  mean /= static_cast<double>(n);
  // var(x1) = 2.4^2/12 = 0.48; 3 sigma of the mean estimate times |domain|
  CHECK(std::abs(b.volume * mean) < 3.0 * b.volume * std::sqrt(0.48 / static_cast<double>(n)));
  CHECK(std::abs(b.volume * mean) < 0.05);
}

TEST_CASE("single-sample batch follows the estimator contract") {
  CounterRng rng(3);
  const VolumeBatch b = sample_volume(rng, 1);
  REQUIRE(b.points.size() == 1);
  const double f = b.points[0].x * b.points[0].y;
  CHECK(b.volume * f == 2.4 * 2.4 * 2.4 * f);
}

TEST_CASE("identical rng state reproduces batches") {
  CounterRng a(7, 2), b(7, 2);
  const VolumeBatch ba = sample_volume(a, 500);
  const VolumeBatch bb = sample_volume(b, 500);
  for (std::size_t i = 0; i < 500; ++i) REQUIRE(norm(ba.points[i] - bb.points[i]) == 0.0);
}

namespace {
PointCloud weighted_cloud(std::size_t n, std::uint64_t seed, bool uniform) {
  CounterRng rng(seed);
  PointCloud pc;
  pc.points.resize(n);
  pc.weights.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    pc.points[i] = rng.next_in_domain() * 0.8;
    pc.weights[i] = uniform ? 1.0 : rng.uniform(0.2, 3.0);
    total += pc.weights[i];
  }
  for (double& w : pc.weights) w /= total;
  return pc;
}
}  // namespace

TEST_CASE("m = N with uniform weights selects every point once") {
  const PointCloud pc = weighted_cloud(64, 11, true);
  CounterRng rng(12);
  const SurfaceBatch b = sample_surface(pc, rng, 64);
  REQUIRE(b.points.size() == 64);
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(b.weights[i] == 1.0 / 64.0);
    CHECK(norm(b.points[i] - pc.points[i]) == 0.0);
  }
}

TEST_CASE("constant integrands pass through the surface estimator") {
  const PointCloud pc = weighted_cloud(200, 13, false);
  CounterRng rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const SurfaceBatch b = sample_surface(pc, rng, 50);
    double est = 0.0;
    for (std::size_t j = 0; j < b.points.size(); ++j) est += b.weights[j] * 3.25;
    CHECK(est == Catch::Approx(3.25).margin(1e-12));
  }
}

TEST_CASE("surface subsampling is unbiased against the full weighted sum") {
  const PointCloud pc = weighted_cloud(400, 15, false);
  const auto u = [](const Vec3& p) { return p.x > 0.1 ? 1.0 : 0.0; };  // half-space indicator
  double full = 0.0;
  for (std::size_t i = 0; i < pc.size(); ++i) full += pc.weights[i] * u(pc.points[i]);

  CounterRng rng(16);
  const int batches = 10000;
  const std::size_t m = 40;
  double sum = 0.0, sumsq = 0.0;
  for (int t = 0; t < batches; ++t) {
    const SurfaceBatch b = sample_surface(pc, rng, m);
    double est = 0.0;
    for (std::size_t j = 0; j < m; ++j) est += b.weights[j] * u(b.points[j]);
    sum += est;
    sumsq += est * est;
  }
  const double mean = sum / batches;
  const double var = sumsq / batches - mean * mean;
  const double stderr3 = 3.0 * std::sqrt(std::max(var, 1e-18) / batches);
  CHECK(std::abs(mean - full) < stderr3);
}

TEST_CASE("narrow band sampling stays inside the band") {
  const auto sphere = [](const Vec3& p) { return norm(p) - 0.5; };
  CounterRng rng(17);
  const auto pts = sample_narrow_band(sphere, 0.1, 2000, rng);
  REQUIRE(pts.size() == 2000);
  for (const Vec3& p : pts) {
    const double r = norm(p);
    REQUIRE(r >= 0.4);
    REQUIRE(r <= 0.6);
    REQUIRE(inside_domain(p));
  }
}

TEST_CASE("empty band raises RejectionStall") {
  CounterRng rng(18);
  try {
    sample_narrow_band([](const Vec3&) { return 1.0; }, 0.1, 10, rng);
    FAIL("expected RejectionStall");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RejectionStall);
  }
}

TEST_CASE("band side fractions match the analytic shell volumes") {
  const auto sphere = [](const Vec3& p) { return norm(p) - 0.5; };
  CounterRng rng(19);
  const std::size_t n = 100000;
  const auto pts = sample_narrow_band(sphere, 0.1, n, rng);
  std::size_t outside = 0;
  for (const Vec3& p : pts)
    if (sphere(p) > 0.0) ++outside;
  // volume ratio (0.6^3 - 0.5^3) / (0.6^3 - 0.4^3)
  const double expected = (0.216 - 0.125) / (0.216 - 0.064);
  CHECK(std::abs(static_cast<double>(outside) / static_cast<double>(n) - expected) < 0.01);
}
