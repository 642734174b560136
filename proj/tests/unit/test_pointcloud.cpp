#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "heatsdf/pointcloud.hpp"
#include "heatsdf/rng.hpp"
#include "support/testutil.hpp"

using namespace heatsdf;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p, std::ios::binary);
  out << content;
  return p;
}

PointCloud make_cloud(std::vector<Vec3> pts) {
  PointCloud pc;
  pc.weights.assign(pts.size(), 1.0 / static_cast<double>(pts.size()));
  pc.points = std::move(pts);
  return pc;
}

// Reference weight computation, O(N^2), straight from the definitions.
std::vector<double> brute_force_weights(const std::vector<Vec3>& pts, double eps) {
  std::vector<double> w(pts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < pts.size(); ++j)
      s += mollifier(norm2(pts[i] - pts[j]) / (eps * eps));
    w[i] = (eps * eps * eps) / s;
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

double brute_force_kth_neighbor_max(const std::vector<Vec3>& pts, int k) {
  double result = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) d.push_back(norm(pts[j] - pts[i]));
    std::sort(d.begin(), d.end());
    result = std::max(result, d[static_cast<std::size_t>(k) - 1]);
  }
  return result;
}

PointCloud random_cloud(CounterRng& rng, std::size_t n, double spread = 0.8) {
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(-spread, spread)};
  return make_cloud(std::move(pts));
}

}  // namespace

TEST_CASE("xyz loading initializes uniform weights") {
  const auto p = write_temp("pc_basic.xyz", "0 0 0\n1 0 0\n0 1 0\n0 0 1\n");
  const PointCloud pc = load_point_cloud(p, CloudFormat::XYZ);
  REQUIRE(pc.size() == 4);
  for (double w : pc.weights) CHECK(w == 0.25);
  CHECK(pc.epsilon == 0.0);
  CHECK(pc.points[1].x == 1.0);
}

TEST_CASE("obj loading keeps vertices and ignores faces") {
  const auto p = write_temp("pc_faces.obj",
                            "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 3\nf 2 3 4\n");
  const PointCloud pc = load_point_cloud(p, CloudFormat::OBJ);
  CHECK(pc.size() == 4);
}

TEST_CASE("empty and tiny files raise TooFewPoints") {
  const auto p = write_temp("pc_empty.xyz", "");
  try {
    load_point_cloud(p, CloudFormat::XYZ);
    FAIL("expected TooFewPoints");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewPoints);
  }
}

TEST_CASE("parse errors carry the line number") {
  const auto p = write_temp("pc_bad.xyz", "0 0 0\n1 nope 0\n");
  try {
    load_point_cloud(p, CloudFormat::XYZ);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("missing file raises FileNotFound") {
  try {
    load_point_cloud("/nonexistent/cloud.xyz", CloudFormat::XYZ);
    FAIL("expected FileNotFound");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FileNotFound);
  }
}

TEST_CASE("ascii and binary ply agree") {
  std::string ascii =
      "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\n"
      "property float z\nend_header\n0 0 0\n0.5 0 0\n0 0.5 0\n0 0 0.5\n";
  const auto pa = write_temp("pc.ply", ascii);
  const PointCloud a = load_point_cloud(pa, CloudFormat::PLY);
  REQUIRE(a.size() == 4);
  CHECK(a.points[1].x == 0.5);

  std::string bin =
      "ply\nformat binary_little_endian 1.0\nelement vertex 4\nproperty float x\n"
      "property float y\nproperty float z\nend_header\n";
  const float vals[12] = {0, 0, 0, 0.5f, 0, 0, 0, 0.5f, 0, 0, 0, 0.5f};
  bin.append(reinterpret_cast<const char*>(vals), sizeof(vals));
  const auto pb = write_temp("pc_bin.ply", bin);
  const PointCloud b = load_point_cloud(pb, CloudFormat::PLY);
  REQUIRE(b.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.points[i].x == b.points[i].x);
    CHECK(a.points[i].y == b.points[i].y);
    CHECK(a.points[i].z == b.points[i].z);
  }
}

TEST_CASE("normalization maps the bounding box onto [-1,1]^3") {
  SECTION("cube spanning [0,10]^3") {
    const PointCloud pc = make_cloud({{0, 0, 0}, {10, 10, 10}, {10, 0, 0}, {0, 10, 5}});
    const PointCloud n = normalize_to_domain(pc);
    CHECK(n.transform.scale == Catch::Approx(0.2).epsilon(1e-14));
    CHECK(n.points[0].x == Catch::Approx(-1.0).margin(1e-14));
    CHECK(n.points[1].x == Catch::Approx(1.0).margin(1e-14));
  }
  SECTION("anisotropic box gets isotropic scaling") {
    const PointCloud pc = make_cloud({{0, 0, 0}, {4, 2, 2}, {4, 0, 0}, {0, 2, 1}});
    const PointCloud n = normalize_to_domain(pc);
    CHECK(n.transform.scale == Catch::Approx(0.5).epsilon(1e-14));
    CHECK(n.points[0].x == Catch::Approx(-1.0).margin(1e-14));
    CHECK(n.points[1].x == Catch::Approx(1.0).margin(1e-14));
    CHECK(n.points[0].y == Catch::Approx(-0.5).margin(1e-14));
    CHECK(n.points[1].y == Catch::Approx(0.5).margin(1e-14));
  }
  SECTION("already normalized cloud is unchanged") {
    const PointCloud pc = make_cloud({{-1, -1, -1}, {1, 1, 1}, {0.3, -0.2, 0.8}, {0, 0, 0}});
    const PointCloud n = normalize_to_domain(pc);
    for (std::size_t i = 0; i < pc.size(); ++i)
      CHECK(norm(n.points[i] - pc.points[i]) < 1e-12);
  }
  SECTION("degenerate cloud") {
    const PointCloud pc = make_cloud({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
    try {
      normalize_to_domain(pc);
      FAIL("expected DegenerateCloud");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DegenerateCloud);
    }
  }
}

TEST_CASE("transform round trip is the identity") {
  CounterRng rng(3);
  const PointCloud pc = random_cloud(rng, 50, 7.0);
  const PointCloud n = normalize_to_domain(pc);
  for (int i = 0; i < 20; ++i) {
    const Vec3 x{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    CHECK(norm(n.transform.inverse(n.transform.apply(x)) - x) < 1e-12);
  }
}

TEST_CASE("normalized points stay in [-1,1]^3 with the domain margin") {
  CounterRng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud n = normalize_to_domain(random_cloud(rng, 200, rng.uniform(0.1, 40.0)));
    for (const Vec3& p : n.points)
      for (int d = 0; d < 3; ++d) {
        REQUIRE(p[d] >= -1.0);
        REQUIRE(p[d] <= 1.0);
      }
  }
}

TEST_CASE("epsilon search matches the brute-force 12th-neighbor distance") {
  SECTION("14 points on a line") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 14; ++i) pts.push_back({0.1 * i, 0.0, 0.0});
    const PointCloud pc = make_cloud(pts);
    const double eps = select_epsilon(pc, 12);
    const double brute = brute_force_kth_neighbor_max(pts, 12);
    CHECK(brute == Catch::Approx(1.2).epsilon(1e-12));
    CHECK(eps >= brute);
    CHECK(eps <= brute * 1.5);
  }
  SECTION("tight cluster of 13 points") {
    CounterRng rng(17);
    std::vector<Vec3> pts;
    for (int i = 0; i < 13; ++i)
      pts.push_back({rng.uniform(-0.005, 0.005), rng.uniform(-0.005, 0.005), rng.uniform(-0.005, 0.005)});
    const PointCloud pc = make_cloud(pts);
    const double brute = brute_force_kth_neighbor_max(pts, 12);
    const double eps = select_epsilon(pc, 12);
    CHECK(eps == Catch::Approx(brute * 1.05).epsilon(1e-12));
  }
  SECTION("random clouds") {
    CounterRng rng(19);
    for (int trial = 0; trial < 5; ++trial) {
      const PointCloud pc = random_cloud(rng, 300);
      CHECK(select_epsilon(pc, 12) ==
            Catch::Approx(brute_force_kth_neighbor_max(pc.points, 12) * 1.05).epsilon(1e-12));
    }
  }
  SECTION("k = 0 returns the smallest representable value") {
    CounterRng rng(23);
    CHECK(select_epsilon(random_cloud(rng, 20), 0) == std::numeric_limits<double>::min());
  }
}

TEST_CASE("adaptive weights: isolated points get uniform weights") {
  const PointCloud pc = make_cloud({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}});
  const PointCloud w = compute_adaptive_weights(pc, 0.5);
  for (double x : w.weights) CHECK(x == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("adaptive weights: coincident pair plus isolated point") {
  const PointCloud pc = make_cloud({{0, 0, 0}, {0, 0, 0}, {1, 0, 0}});
  const PointCloud w = compute_adaptive_weights(pc, 0.25);
  CHECK(w.weights[0] == Catch::Approx(0.25).margin(1e-12));
  CHECK(w.weights[1] == Catch::Approx(0.25).margin(1e-12));
  CHECK(w.weights[2] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("adaptive weights on a uniform sphere are nearly uniform") {
  // Fibonacci lattice: evenly spaced points on the sphere.
  const int n = 2000;
  std::vector<Vec3> pts(n);
  const double ga = 2.399963229728653;
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(1.0 - z * z);
    pts[i] = Vec3{r * std::cos(ga * i), r * std::sin(ga * i), z} * 0.5;
  }
  const PointCloud pc = make_cloud(pts);
  const PointCloud w = compute_adaptive_weights(pc, select_epsilon(pc, 12));
  const auto [mn, mx] = std::minmax_element(w.weights.begin(), w.weights.end());
  CHECK(*mx / *mn < 1.5);
}

TEST_CASE("weights sum to one and are permutation equivariant") {
  CounterRng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const PointCloud pc = random_cloud(rng, 150, 0.4);
    const double eps = select_epsilon(pc, 6);
    const PointCloud w = compute_adaptive_weights(pc, eps);
    double sum = 0.0;
    for (double x : w.weights) {
      REQUIRE(x >= 0.0);
      sum += x;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));

    // reverse the points: weights must follow
    PointCloud rev = pc;
    std::reverse(rev.points.begin(), rev.points.end());
    const PointCloud wr = compute_adaptive_weights(rev, eps);
    for (std::size_t i = 0; i < pc.size(); ++i)
      CHECK(testutil::rel_err(wr.weights[pc.size() - 1 - i], w.weights[i]) < 1e-12);
  }
}

TEST_CASE("duplicating every point preserves combined weights") {
  CounterRng rng(37);
  const PointCloud pc = random_cloud(rng, 100, 0.4);
  const double eps = select_epsilon(pc, 6);
  const PointCloud w = compute_adaptive_weights(pc, eps);

  PointCloud dup = pc;
  dup.points.insert(dup.points.end(), pc.points.begin(), pc.points.end());
  dup.weights.assign(dup.points.size(), 1.0 / static_cast<double>(dup.points.size()));
  const PointCloud wd = compute_adaptive_weights(dup, eps);
  for (std::size_t i = 0; i < pc.size(); ++i)
    CHECK(std::abs(wd.weights[i] + wd.weights[i + pc.size()] - w.weights[i]) < 1e-9);
}

TEST_CASE("mollifier support is exactly [0, eps)") {
  CHECK(mollifier(1.0) == 0.0);
  CHECK(mollifier(1.5) == 0.0);
  CHECK(mollifier(0.0) == Catch::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(mollifier(0.96) > 0.0);
}

TEST_CASE("hash-accelerated weights match the brute-force reference") {
  CounterRng rng(41);
  for (std::size_t n : {50u, 500u, 2000u}) {
    const PointCloud pc = random_cloud(rng, n, 0.6);
    const double eps = select_epsilon(pc, 8);
    const PointCloud w = compute_adaptive_weights(pc, eps);
    const auto brute = brute_force_weights(pc.points, eps);
    CHECK(testutil::array_rel_err(w.weights, brute) < 1e-12);
  }
}

TEST_CASE("xyz export round trips") {
  CounterRng rng(43);
  const PointCloud pc = random_cloud(rng, 30);
  const auto p = fs::temp_directory_path() / "roundtrip.xyz";
  save_xyz(pc, p);
  const PointCloud back = load_point_cloud(p, CloudFormat::XYZ);
  REQUIRE(back.size() == pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) CHECK(norm(back.points[i] - pc.points[i]) == 0.0);
}
