#include <catch2/catch_amalgamated.hpp>

#include "heatsdf/neuralfield.hpp"
#include "heatsdf/oracle.hpp"
#include "support/testutil.hpp"

using namespace heatsdf;

namespace {

// Independent transcription of the capped-torus distance: clamp the angular
// parameter of the closest arc point directly, then measure to the circle.
double capped_torus_reference(const CappedTorus& s, const Vec3& p) {
  double t = std::atan2(p.x, p.y);  // angle from the +y axis
  t = std::clamp(t, -s.aperture, s.aperture);
  const Vec3 arc{s.major * std::sin(t), s.major * std::cos(t), 0.0};
  return norm(p - arc) - s.minor;
}

std::vector<Vec3> grid_band_nodes(const GridField& g, const AnalyticShape& shape, double band) {
  std::vector<Vec3> nodes;
  for (int i = 0; i < g.dims; ++i)
    for (int j = 0; j < g.dims; ++j)
      for (int k = 0; k < g.dims; ++k) {
        const Vec3 p = g.node(i, j, k);
        if (std::abs(analytic_sdf(shape, p)) <= band) nodes.push_back(p);
      }
  return nodes;
}

}  // namespace

TEST_CASE("analytic sdf values") {
  CHECK(analytic_sdf(Sphere{{0, 0, 0}, 0.5}, {0, 0, 0}) == -0.5);
  CHECK(analytic_sdf(Sphere{{0, 0, 0}, 0.5}, {0.7, 0, 0}) == Catch::Approx(0.2).margin(1e-15));
  CHECK(analytic_sdf(Torus{0.5, 0.2}, {0.5, 0, 0.2}) == Catch::Approx(0.0).margin(1e-15));
  CHECK(analytic_sdf(Torus{0.5, 0.2}, {0.5, 0, 0}) == Catch::Approx(-0.2).margin(1e-15));
  CHECK(analytic_sdf(Box{{0.5, 0.5, 0.5}}, {0, 0, 0}) == -0.5);
  CHECK(analytic_sdf(Box{{0.5, 0.5, 0.5}}, {1.0, 0, 0}) == Catch::Approx(0.5).margin(1e-15));
  CHECK(analytic_sdf(Plane{{0, 0, 1}, 0.0}, {0.3, 0.2, 0.7}) == Catch::Approx(0.7));
}

TEST_CASE("capped torus matches an independent transcription") {
  const CappedTorus shape{};
  CounterRng rng(3);
  for (int i = 0; i < 10; ++i) {
    const Vec3 p = rng.next_in_domain();
    CHECK(analytic_sdf(shape, p) == Catch::Approx(capped_torus_reference(shape, p)).margin(1e-12));
  }
  // also off-default parameters
  const CappedTorus other{1.1, 0.45, 0.1};
  for (int i = 0; i < 10; ++i) {
    const Vec3 p = rng.next_in_domain();
    CHECK(analytic_sdf(other, p) == Catch::Approx(capped_torus_reference(other, p)).margin(1e-12));
  }
}

TEST_CASE("samplers produce on-surface points for every shape") {
  CounterRng dummy(0);
  const std::vector<AnalyticShape> shapes = {Sphere{}, Box{}, Torus{}, CappedTorus{}};
  for (const auto& shape : shapes) {
    const PointCloud pc = analytic_sample(shape, 500, SampleMode::Uniform, 7);
    REQUIRE(pc.size() == 500);
    for (const Vec3& p : pc.points) REQUIRE(std::abs(analytic_sdf(shape, p)) < 1e-9);
  }
}

TEST_CASE("nonuniform mode skews density toward positive x") {
  const PointCloud pc = analytic_sample(Sphere{}, 20000, SampleMode::NonUniform, 9);
  std::size_t pos = 0;
  for (const Vec3& p : pc.points)
    if (p.x > 0.0) ++pos;
  // On the radius-0.5 sphere the x coordinate is uniform on [-0.5, 0.5], so
  // the positive half carries int_0^0.5 (1+9x) dx = 1.625 mass against 0.5.
  const double expect = 1.625 / 2.125;
  CHECK(std::abs(static_cast<double>(pos) / 20000.0 - expect) < 0.02);
}

TEST_CASE("noisy mode displaces along normals with sigma 0.005") {
  const PointCloud pc = analytic_sample(Sphere{}, 5000, SampleMode::Noisy, 11);
  double sq = 0.0;
  for (const Vec3& p : pc.points) {
    const double d = analytic_sdf(Sphere{}, p);
    REQUIRE(std::abs(d) < 0.05);
    sq += d * d;
  }
  CHECK(std::sqrt(sq / 5000.0) == Catch::Approx(0.005).epsilon(0.1));
}

TEST_CASE("deposit conserves the total weight exactly") {
  const PointCloud pc = analytic_sample(Sphere{}, 3000, SampleMode::Uniform, 13);
  const auto b = grid_deposit(pc, 24);
  double total = 0.0;
  for (double v : b) total += v;
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("tau -> 0 recovers the mass-weighted deposit") {
  PointCloud pc;
  pc.points = {{0.1234, -0.2345, 0.0456}, {0.1234, -0.2345, 0.0456},
               {0.1234, -0.2345, 0.0456}, {0.1234, -0.2345, 0.0456}};
  pc.weights.assign(4, 0.25);
  const int dims = 16;
  const GridField u = grid_heat_step(pc, 1e-9, dims);
  const auto b = grid_deposit(pc, dims);
  const auto mass = detail::grid_lumped_mass(dims, u.h);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] > 0.0)
      CHECK(u.values[i] == Catch::Approx(b[i] / mass[i]).epsilon(1e-4));
    else
      CHECK(std::abs(u.values[i]) < 1e-4 * std::abs(b[0] > 0 ? b[0] / mass[0] : 1.0));
  }
}

TEST_CASE("central point mass yields an octahedrally symmetric solution") {
  PointCloud pc;
  pc.points = {{0.0, 0.0, 0.0}};
  pc.weights = {1.0};
  const int dims = 32;
  const GridField u = grid_heat_step(pc, 0.005, dims);
  // the 48-element symmetry group: axis permutations and flips around the center
  auto mirrored = [&](int i) { return dims - 1 - i; };
  for (int i = 0; i < dims; ++i)
    for (int j = 0; j < dims; ++j)
      for (int k = 0; k < dims; ++k) {
        const double v = u.values[u.index(i, j, k)];
        REQUIRE(std::abs(u.values[u.index(mirrored(i), j, k)] - v) < 1e-9);
        REQUIRE(std::abs(u.values[u.index(j, i, k)] - v) < 1e-9);
        REQUIRE(std::abs(u.values[u.index(i, k, j)] - v) < 1e-9);
      }
}

TEST_CASE("manufactured solution converges at second order") {
  // u*(x) = prod_d cos(pi (x_d + 1.2) / 2.4) satisfies the natural boundary
  // conditions; the matching load is (1 + 3 tau (pi/2.4)^2) M u*.
  const double tau = 0.01;
  const double freq = 3.141592653589793 / domain_edge;
  const auto exact = [&](const Vec3& p) {
    return std::cos(freq * (p.x + domain_half)) * std::cos(freq * (p.y + domain_half)) *
           std::cos(freq * (p.z + domain_half));
  };
  const double factor = 1.0 + 3.0 * tau * freq * freq;

  const auto error_at = [&](int dims) {
    const double h = domain_edge / (dims - 1);
    const auto mass = detail::grid_lumped_mass(dims, h);
    std::vector<double> load(mass.size());
    GridField probe;
    probe.dims = dims;
    probe.h = h;
    std::size_t idx = 0;
    for (int i = 0; i < dims; ++i)
      for (int j = 0; j < dims; ++j)
        for (int k = 0; k < dims; ++k, ++idx)
          load[idx] = factor * mass[idx] * exact(probe.node(i, j, k));
    const GridField u = grid_solve(dims, tau, load);
    double err = 0.0;
    idx = 0;
    for (int i = 0; i < dims; ++i)
      for (int j = 0; j < dims; ++j)
        for (int k = 0; k < dims; ++k, ++idx)
          err = std::max(err, std::abs(u.values[idx] - exact(u.node(i, j, k))));
    return err;
  };

  const double e16 = error_at(16);
  const double e32 = error_at(32);
  const double ratio = e16 / e32;
  CHECK(ratio > 3.2);
  CHECK(ratio < 4.8);
}

TEST_CASE("cg residuals decrease monotonically") {
  const PointCloud pc = analytic_sample(Sphere{}, 2000, SampleMode::Uniform, 17);
  std::vector<double> trace;
  grid_heat_step(pc, 0.005, 24, &trace);
  REQUIRE(trace.size() > 3);
  for (std::size_t i = 1; i < trace.size(); ++i) REQUIRE(trace[i] <= trace[i - 1] * (1.0 + 1e-12));
}

TEST_CASE("grid heat gradients point radially for a sphere cloud") {
  const AnalyticShape sphere = Sphere{};
  const PointCloud pc = analytic_sample(sphere, 5000, SampleMode::Uniform, 19);
  const GridField u = grid_heat_step(pc, 0.005, 48);
  std::vector<double> cosines;
  for (int i = 1; i + 1 < u.dims; ++i)
    for (int j = 1; j + 1 < u.dims; ++j)
      for (int k = 1; k + 1 < u.dims; ++k) {
        const Vec3 p = u.node(i, j, k);
        const double d = norm(p) - 0.5;
        if (std::abs(d) > 0.1) continue;
        if (std::abs(d) < u.h) continue;  // gradient of the unsigned distance is kinked at the surface
        const Vec3 g = u.gradient_at_node(i, j, k);
        if (norm(g) < 1e-12) continue;
        const Vec3 radial = normalized(p) * (d > 0.0 ? 1.0 : -1.0);
        cosines.push_back(dot(normalized(-1.0 * g), radial));
      }
  REQUIRE(cosines.size() > 500);
  std::sort(cosines.begin(), cosines.end());
  CHECK(cosines[(cosines.size() - 1) / 2] > 0.99);
}

TEST_CASE("field comparison statistics") {
  const PointCloud pc = analytic_sample(Sphere{}, 3000, SampleMode::Uniform, 23);
  const GridField u = grid_heat_step(pc, 0.01, 24);

  const auto self = [&](const Vec3& p) { return FieldSample{u.value_at(p), u.gradient_at(p)}; };
  const auto negself = [&](const Vec3& p) {
    return FieldSample{-u.value_at(p), -1.0 * u.gradient_at(p)};
  };

  CounterRng rng(29);
  std::vector<Vec3> pts(3000);
  for (auto& p : pts) p = rng.next_in_domain();

  const FieldComparison same = compare_fields(self, u, pts);
  CHECK(same.pearson == Catch::Approx(1.0).margin(1e-12));
  CHECK(same.median_gradient_angle_deg == Catch::Approx(0.0).margin(1e-6));

  const FieldComparison neg = compare_fields(negself, u, pts);
  CHECK(neg.pearson == Catch::Approx(-1.0).margin(1e-12));

  // independent random fields decorrelate
  const auto noise = [&](const Vec3& p) {
    CounterRng h(fnv1a64(&p, sizeof(p)));
    return FieldSample{h.uniform(-1, 1), {h.normal(), h.normal(), h.normal()}};
  };
  std::vector<Vec3> many(10000);
  for (auto& p : many) p = rng.next_in_domain();
  const FieldComparison indep = compare_fields(noise, u, many);
  CHECK(std::abs(indep.pearson) < 0.1);
}

TEST_CASE("grid files round trip") {
  const PointCloud pc = analytic_sample(Sphere{}, 1000, SampleMode::Uniform, 31);
  const GridField u = grid_heat_step(pc, 0.005, 16);
  const auto p = std::filesystem::temp_directory_path() / "grid.bin";
  save_grid(u, p);
  const GridField back = load_grid(p);
  CHECK(back.dims == u.dims);
  CHECK(back.h == u.h);
  CHECK(back.values == u.values);
}
