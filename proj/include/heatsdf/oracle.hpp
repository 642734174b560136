#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <variant>
#include <vector>

#include "heatsdf/core.hpp"
#include "heatsdf/pointcloud.hpp"
#include "heatsdf/rng.hpp"

namespace heatsdf {

// Closed-form signed distance fields used for verification and fixtures.
struct Sphere {
  Vec3 center{0.0, 0.0, 0.0};
  double radius = 0.5;
};
struct Box {
  Vec3 half{0.6, 0.4, 0.3};
};
struct Torus {  // axis z, tube centerline in the xy-plane
  double major = 0.5;
  double minor = 0.2;
};
// Arc of radius `major` in the xy-plane spanning angles [-aperture, aperture]
// from the +y axis, thickened by `minor`; the defaults fit [-1,1]^3 with a
// 0.22 margin.
struct CappedTorus {
  double aperture = 2.0;
  double major = 0.6;
  double minor = 0.18;
};
struct Plane {  // dot(normal, x) + offset
  Vec3 normal{0.0, 0.0, 1.0};
  double offset = 0.0;
};

using AnalyticShape = std::variant<Sphere, Box, Torus, CappedTorus, Plane>;

inline double analytic_sdf(const AnalyticShape& shape, const Vec3& p) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return norm(p - s.center) - s.radius;
        } else if constexpr (std::is_same_v<T, Box>) {
          const Vec3 q{std::abs(p.x) - s.half.x, std::abs(p.y) - s.half.y, std::abs(p.z) - s.half.z};
          const Vec3 qp{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
          return norm(qp) + std::min(std::max({q.x, q.y, q.z}), 0.0);
        } else if constexpr (std::is_same_v<T, Torus>) {
          const double ring = std::sqrt(p.x * p.x + p.y * p.y) - s.major;
          return std::sqrt(ring * ring + p.z * p.z) - s.minor;
        } else if constexpr (std::is_same_v<T, CappedTorus>) {
          const double sx = std::sin(s.aperture), cx = std::cos(s.aperture);
          const double px = std::abs(p.x);
          const double k = (cx * px > sx * p.y) ? (px * sx + p.y * cx)
                                                : std::sqrt(px * px + p.y * p.y);
          return std::sqrt(px * px + p.y * p.y + p.z * p.z + s.major * s.major -
                           2.0 * s.major * k) -
                 s.minor;
        } else {
          return dot(s.normal, p) + s.offset;
        }
      },
      shape);
}

// Outward unit normal via central differences of the SDF; accurate far
// beyond the uses it has here (sampler noise directions).
inline Vec3 analytic_normal(const AnalyticShape& shape, const Vec3& p, double step = 1e-6) {
  Vec3 g;
  for (int d = 0; d < 3; ++d) {
    Vec3 up = p, down = p;
    up[d] += step;
    down[d] -= step;
    g[d] = (analytic_sdf(shape, up) - analytic_sdf(shape, down)) / (2.0 * step);
  }
  return normalized(g);
}

enum class SampleMode { Uniform, NonUniform, Noisy, Sparse };

namespace detail {

inline Vec3 sample_on_surface(const AnalyticShape& shape, CounterRng& rng) {
  return std::visit(
      [&](const auto& s) -> Vec3 {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          const double z = rng.uniform(-1.0, 1.0);
          const double t = rng.uniform(0.0, 6.283185307179586);
          const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
          return s.center + Vec3{r * std::cos(t), r * std::sin(t), z} * s.radius;
        } else if constexpr (std::is_same_v<T, Box>) {
          const double ax = s.half.y * s.half.z, ay = s.half.x * s.half.z, az = s.half.x * s.half.y;
          const double u = rng.next_double() * (ax + ay + az);
          const double sign = rng.next_double() < 0.5 ? -1.0 : 1.0;
          Vec3 p{rng.uniform(-s.half.x, s.half.x), rng.uniform(-s.half.y, s.half.y),
                 rng.uniform(-s.half.z, s.half.z)};
          if (u < ax)
            p.x = sign * s.half.x;
          else if (u < ax + ay)
            p.y = sign * s.half.y;
          else
            p.z = sign * s.half.z;
          return p;
        } else if constexpr (std::is_same_v<T, Torus>) {
          const double u = rng.uniform(0.0, 6.283185307179586);
          double v;
          do {
            v = rng.uniform(0.0, 6.283185307179586);
          } while (rng.next_double() >=
                   (s.major + s.minor * std::cos(v)) / (s.major + s.minor));
          const double ring = s.major + s.minor * std::cos(v);
          return {ring * std::cos(u), ring * std::sin(u), s.minor * std::sin(v)};
        } else if constexpr (std::is_same_v<T, CappedTorus>) {
          // tube around the open arc plus two hemispherical end caps
          const double tube_area = 4.0 * 3.141592653589793 * s.aperture * s.major * s.minor;
          const double caps_area = 4.0 * 3.141592653589793 * s.minor * s.minor;
          if (rng.next_double() < tube_area / (tube_area + caps_area)) {
            const double t = rng.uniform(-s.aperture, s.aperture);
            double v;
            do {
              v = rng.uniform(0.0, 6.283185307179586);
            } while (rng.next_double() >=
                     (s.major + s.minor * std::cos(v)) / (s.major + s.minor));
            const Vec3 radial{std::sin(t), std::cos(t), 0.0};
            return s.major * radial + s.minor * (std::cos(v) * radial + Vec3{0.0, 0.0, std::sin(v)});
          }
          const double end = rng.next_double() < 0.5 ? -1.0 : 1.0;
          const double t = end * s.aperture;
          const Vec3 e = s.major * Vec3{std::sin(t), std::cos(t), 0.0};
          const Vec3 tangent{end * std::cos(t), -end * std::sin(t), 0.0};  // outward along the arc
          Vec3 d;
          do {
            d = {rng.normal(), rng.normal(), rng.normal()};
          } while (norm(d) < 1e-9);
          d = normalized(d);
          if (dot(d, tangent) < 0.0) d = -d;
          return e + s.minor * d;
        } else {
          // patch of the plane through -offset*normal spanned by a local frame
          const Vec3 n = normalized(s.normal);
          const Vec3 a = normalized(std::abs(n.x) < 0.9 ? cross(n, Vec3{1, 0, 0})
                                                        : cross(n, Vec3{0, 1, 0}));
          const Vec3 b = cross(n, a);
          return n * (-s.offset) + a * rng.uniform(-1.0, 1.0) + b * rng.uniform(-1.0, 1.0);
        }
      },
      shape);
}

}  // namespace detail

// On-surface point clouds for the fixtures. NonUniform thins the density by
// the factor (1 + 9 max(0, x1))/10; Noisy displaces along the normal with
// sigma = 0.005; Sparse is uniform (sparsity comes from the requested count).
inline PointCloud analytic_sample(const AnalyticShape& shape, std::size_t n, SampleMode mode,
                                  std::uint64_t seed) {
  CounterRng rng(seed, 0x5A);
  PointCloud pc;
  pc.points.reserve(n);
  while (pc.points.size() < n) {
    Vec3 p = detail::sample_on_surface(shape, rng);
    if (mode == SampleMode::NonUniform &&
        rng.next_double() >= (1.0 + 9.0 * std::max(0.0, p.x)) / 10.0)
      continue;
    if (mode == SampleMode::Noisy) p += analytic_normal(shape, p) * (0.005 * rng.normal());
    pc.points.push_back(p);
  }
  pc.weights.assign(n, 1.0 / static_cast<double>(n));
  return pc;
}

// Node-centered scalar field on a regular grid over the domain, with node
// spacing h = 2.4/(dims-1) (nodes include the boundary).
struct GridField {
  int dims = 32;
  Vec3 origin{-domain_half, -domain_half, -domain_half};
  double h = domain_edge / 31.0;
  std::vector<double> values;  // index (i*dims + j)*dims + k

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims + j) * dims + k;
  }
  Vec3 node(int i, int j, int k) const {
    return {origin.x + i * h, origin.y + j * h, origin.z + k * h};
  }

  void locate(const Vec3& p, int c[3], double f[3]) const {
    for (int d = 0; d < 3; ++d) {
      const double t = (p[d] - origin[d]) / h;
      c[d] = std::clamp(static_cast<int>(std::floor(t)), 0, dims - 2);
      f[d] = std::clamp(t - c[d], 0.0, 1.0);
    }
  }

  double value_at(const Vec3& p) const {
    int c[3];
    double f[3];
    locate(p, c, f);
    double v = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int g = 0; g < 2; ++g) {
          const double w = (a ? f[0] : 1 - f[0]) * (b ? f[1] : 1 - f[1]) * (g ? f[2] : 1 - f[2]);
          v += w * values[index(c[0] + a, c[1] + b, c[2] + g)];
        }
    return v;
  }

  // node-centered central differences (one-sided at the boundary)
  Vec3 gradient_at_node(int i, int j, int k) const {
    auto diff = [&](int a, int b, int c, int d) {
      const int lo[3] = {a - (d == 0), b - (d == 1), c - (d == 2)};
      const int hi[3] = {a + (d == 0), b + (d == 1), c + (d == 2)};
      const int l0 = std::max(lo[0], 0), l1 = std::max(lo[1], 0), l2 = std::max(lo[2], 0);
      const int h0 = std::min(hi[0], dims - 1), h1 = std::min(hi[1], dims - 1),
                h2 = std::min(hi[2], dims - 1);
      const double span = (d == 0 ? h0 - l0 : d == 1 ? h1 - l1 : h2 - l2) * h;
      return (values[index(h0, h1, h2)] - values[index(l0, l1, l2)]) / span;
    };
    return {diff(i, j, k, 0), diff(i, j, k, 1), diff(i, j, k, 2)};
  }

  // gradient of the trilinear interpolant (piecewise per cell)
  Vec3 gradient_at(const Vec3& p) const {
    int c[3];
    double f[3];
    locate(p, c, f);
    Vec3 g{0.0, 0.0, 0.0};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int gg = 0; gg < 2; ++gg) {
          const double v = values[index(c[0] + a, c[1] + b, c[2] + gg)];
          const double wx = a ? 1.0 : -1.0, wy = b ? 1.0 : -1.0, wz = gg ? 1.0 : -1.0;
          g.x += wx * (b ? f[1] : 1 - f[1]) * (gg ? f[2] : 1 - f[2]) * v;
          g.y += (a ? f[0] : 1 - f[0]) * wy * (gg ? f[2] : 1 - f[2]) * v;
          g.z += (a ? f[0] : 1 - f[0]) * (b ? f[1] : 1 - f[1]) * wz * v;
        }
    return g / h;
  }
};

namespace detail {

// Trapezoid lumped mass: h^3 times 1/2 per boundary-touching axis.
inline std::vector<double> grid_lumped_mass(int dims, double h) {
  std::vector<double> m(static_cast<std::size_t>(dims) * dims * dims);
  auto w = [&](int i) { return (i == 0 || i == dims - 1) ? 0.5 : 1.0; };
  std::size_t idx = 0;
  for (int i = 0; i < dims; ++i)
    for (int j = 0; j < dims; ++j)
      for (int k = 0; k < dims; ++k, ++idx) m[idx] = h * h * h * w(i) * w(j) * w(k);
  return m;
}

// y += tau * K x with the edge-based Dirichlet-energy stiffness:
// sum over axis edges of w_e (x_i - x_j)^2, w_e = h * transverse trapezoid
// weights. Natural (zero-Neumann) boundary conditions come for free.
inline void grid_stiffness_apply(int dims, double h, double tau, const std::vector<double>& x,
                                 std::vector<double>& y) {
  auto w = [&](int i) { return (i == 0 || i == dims - 1) ? 0.5 : 1.0; };
  auto idx = [&](int i, int j, int k) { return (static_cast<std::size_t>(i) * dims + j) * dims + k; };
  for (int i = 0; i < dims; ++i)
    for (int j = 0; j < dims; ++j)
      for (int k = 0; k < dims; ++k) {
        const std::size_t a = idx(i, j, k);
        if (i + 1 < dims) {
          const double we = tau * h * w(j) * w(k);
          const std::size_t b = idx(i + 1, j, k);
          const double d = we * (x[a] - x[b]);
          y[a] += d;
          y[b] -= d;
        }
        if (j + 1 < dims) {
          const double we = tau * h * w(i) * w(k);
          const std::size_t b = idx(i, j + 1, k);
          const double d = we * (x[a] - x[b]);
          y[a] += d;
          y[b] -= d;
        }
        if (k + 1 < dims) {
          const double we = tau * h * w(i) * w(j);
          const std::size_t b = idx(i, j, k + 1);
          const double d = we * (x[a] - x[b]);
          y[a] += d;
          y[b] -= d;
        }
      }
}

}  // namespace detail

// Solves (M + tau K) u = load by conjugate gradients (matrix-free, SPD).
// Relative residual 1e-10; the iteration cap signals a bug, not a hard
// system.
inline GridField grid_solve(int dims, double tau, const std::vector<double>& load,
                            std::vector<double>* residual_trace = nullptr) {
  if (dims < 16) throw Error(ErrorKind::ConfigInvalid, "grid solver needs dims >= 16");
  GridField u;
  u.dims = dims;
  u.h = domain_edge / (dims - 1);
  const std::size_t n = static_cast<std::size_t>(dims) * dims * dims;
  if (load.size() != n) throw Error(ErrorKind::ShapeMismatch, "load vector size mismatch");
  u.values.assign(n, 0.0);

  const std::vector<double> mass = detail::grid_lumped_mass(dims, u.h);
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = mass[i] * x[i];
    detail::grid_stiffness_apply(dims, u.h, tau, x, y);
  };

  std::vector<double> r = load, p = load, ap(n);
  double rr = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rr += r[i] * r[i];
    bb += load[i] * load[i];
  }
  const double tol2 = 1e-20 * std::max(1.0, bb);
  const int max_iter = 10 * dims;
  if (residual_trace) residual_trace->push_back(std::sqrt(rr));
  for (int iter = 0; iter < max_iter && rr > tol2; ++iter) {
    apply(p, ap);
    double pap = 0.0;
    for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    const double alpha = rr / pap;
    double rr_new = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      u.values[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      rr_new += r[i] * r[i];
    }
    const double beta = rr_new / rr;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    rr = rr_new;
    if (residual_trace) residual_trace->push_back(std::sqrt(rr));
  }
  if (rr > tol2)
    throw Error(ErrorKind::CgNoConvergence,
                "conjugate gradients did not reach the residual tolerance (SPD system; this is a bug)");
  return u;
}

// Deposits each cloud weight onto its 8 enclosing nodes by trilinear
// splitting; the total deposited mass equals the total weight exactly.
inline std::vector<double> grid_deposit(const PointCloud& pc, int dims) {
  const double h = domain_edge / (dims - 1);
  const Vec3 origin{-domain_half, -domain_half, -domain_half};
  std::vector<double> b(static_cast<std::size_t>(dims) * dims * dims, 0.0);
  auto idx = [&](int i, int j, int k) { return (static_cast<std::size_t>(i) * dims + j) * dims + k; };
  for (std::size_t pi = 0; pi < pc.size(); ++pi) {
    const Vec3& p = pc.points[pi];
    int c[3];
    double f[3];
    for (int d = 0; d < 3; ++d) {
      const double t = (p[d] - origin[d]) / h;
      c[d] = std::clamp(static_cast<int>(std::floor(t)), 0, dims - 2);
      f[d] = std::clamp(t - c[d], 0.0, 1.0);
    }
    for (int a = 0; a < 2; ++a)
      for (int bb = 0; bb < 2; ++bb)
        for (int g = 0; g < 2; ++g) {
          const double w =
              (a ? f[0] : 1 - f[0]) * (bb ? f[1] : 1 - f[1]) * (g ? f[2] : 1 - f[2]);
          b[idx(c[0] + a, c[1] + bb, c[2] + g)] += pc.weights[pi] * w;
        }
  }
  return b;
}

// Grid implicit heat step: backward-Euler discretization of the weak form
// with the weighted cloud as initial measure.
inline GridField grid_heat_step(const PointCloud& pc, double tau, int dims,
                                std::vector<double>* residual_trace = nullptr) {
  return grid_solve(dims, tau, grid_deposit(pc, dims), residual_trace);
}

struct FieldComparison {
  double pearson = 0.0;
  double median_gradient_angle_deg = 0.0;
  double p90_gradient_angle_deg = 0.0;
  std::size_t skipped = 0;  // points where either gradient vanished
};

// Compares a sampled scalar field (anything returning an object with .value
// and .gradient) against a grid field on the given points.
template <class FieldFn>
FieldComparison compare_fields(FieldFn&& field, const GridField& grid, std::span<const Vec3> region) {
  double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
  std::vector<double> angles;
  FieldComparison out;
  const double n = static_cast<double>(region.size());
  for (const Vec3& p : region) {
    const auto s = field(p);  // anything with .value and .gradient
    const double a = s.value;
    const double b = grid.value_at(p);
    sa += a;
    sb += b;
    saa += a * a;
    sbb += b * b;
    sab += a * b;
    const Vec3 ga = s.gradient;
    const Vec3 gb = grid.gradient_at(p);
    if (norm(ga) < 1e-14 || norm(gb) < 1e-14) {
      ++out.skipped;
      continue;
    }
    const double c = std::clamp(dot(normalized(ga), normalized(gb)), -1.0, 1.0);
    angles.push_back(std::acos(c) * 57.29577951308232);
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double va = saa / n - (sa / n) * (sa / n);
  const double vb = sbb / n - (sb / n) * (sb / n);
  out.pearson = cov / std::sqrt(std::max(va * vb, 1e-300));
  if (!angles.empty()) {
    std::sort(angles.begin(), angles.end());
    out.median_gradient_angle_deg = angles[(angles.size() - 1) / 2];
    out.p90_gradient_angle_deg = angles[static_cast<std::size_t>(0.9 * (angles.size() - 1))];
  }
  return out;
}

// Binary grid file: magic, dims, origin, h, then float64 node values in
// (i,j,k) order, little-endian.
inline void save_grid(const GridField& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write("HSGRID1\0", 8);
  const std::int64_t dims = g.dims;
  out.write(reinterpret_cast<const char*>(&dims), 8);
  out.write(reinterpret_cast<const char*>(&g.origin), sizeof(g.origin));
  out.write(reinterpret_cast<const char*>(&g.h), 8);
  out.write(reinterpret_cast<const char*>(g.values.data()),
            static_cast<std::streamsize>(g.values.size() * sizeof(double)));
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

inline GridField load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileNotFound, "grid file not found: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "HSGRID1\0", 8) != 0)
    throw Error(ErrorKind::VersionMismatch, path.string() + ": not a grid file");
  GridField g;
  std::int64_t dims = 0;
  in.read(reinterpret_cast<char*>(&dims), 8);
  g.dims = static_cast<int>(dims);
  in.read(reinterpret_cast<char*>(&g.origin), sizeof(g.origin));
  in.read(reinterpret_cast<char*>(&g.h), 8);
  g.values.resize(static_cast<std::size_t>(g.dims) * g.dims * g.dims);
  in.read(reinterpret_cast<char*>(g.values.data()),
          static_cast<std::streamsize>(g.values.size() * sizeof(double)));
  if (!in) throw Error(ErrorKind::CorruptBlob, path.string() + ": truncated grid payload");
  return g;
}

}  // namespace heatsdf
