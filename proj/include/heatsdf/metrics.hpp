#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "heatsdf/core.hpp"
#include "heatsdf/neuralfield.hpp"
#include "heatsdf/rng.hpp"
#include "heatsdf/sampling.hpp"

namespace heatsdf {

using SampledFieldFn = std::function<FieldSample(const Vec3&)>;

inline SampledFieldFn field_fn(const NeuralField& f) {
  auto ev = std::make_shared<FieldEvaluator>(f);
  return [ev](const Vec3& x) { return ev->value_and_gradient(x); };
}

struct ReferenceMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Vec3> face_normals;  // unit, from the winding order
  std::vector<Vec3> face_centers;
  std::vector<double> face_areas;

  void finalize() {
    face_normals.clear();
    face_centers.clear();
    face_areas.clear();
    std::vector<std::array<int, 3>> kept;
    for (const auto& t : triangles) {
      const Vec3 &a = vertices[t[0]], &b = vertices[t[1]], &c = vertices[t[2]];
      const Vec3 n = cross(b - a, c - a);
      const double len = norm(n);
      if (len < 1e-30) continue;  // degenerate face
      kept.push_back(t);
      face_normals.push_back(n / len);
      face_centers.push_back((a + b + c) / 3.0);
      face_areas.push_back(0.5 * len);
    }
    triangles = std::move(kept);
  }

  std::uint64_t digest() const {
    std::uint64_t h = fnv1a64(vertices.data(), vertices.size() * sizeof(Vec3));
    return fnv1a64(triangles.data(), triangles.size() * sizeof(triangles[0]), h);
  }
};

inline ReferenceMesh load_obj_mesh(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorKind::FileNotFound, "mesh file not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  ReferenceMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.size() < 2) continue;
    if (line[0] == 'v' && (line[1] == ' ' || line[1] == '\t')) {
      std::istringstream ss(line.substr(2));
      Vec3 p;
      if (!(ss >> p.x >> p.y >> p.z))
        throw Error(ErrorKind::ParseError, path.string() + ": bad vertex at line " + std::to_string(lineno));
      mesh.vertices.push_back(p);
    } else if (line[0] == 'f' && (line[1] == ' ' || line[1] == '\t')) {
      std::istringstream ss(line.substr(2));
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        // "v", "v/vt", "v//vn", "v/vt/vn"
        const int v = std::stoi(tok.substr(0, tok.find('/')));
        idx.push_back(v > 0 ? v - 1 : static_cast<int>(mesh.vertices.size()) + v);
      }
      if (idx.size() < 3)
        throw Error(ErrorKind::ParseError, path.string() + ": bad face at line " + std::to_string(lineno));
      for (std::size_t i = 2; i < idx.size(); ++i)
        mesh.triangles.push_back({idx[0], idx[static_cast<int>(i) - 1], idx[static_cast<int>(i)]});
    }
  }
  if (mesh.triangles.empty())
    throw Error(ErrorKind::ParseError, path.string() + ": mesh has no faces");
  mesh.finalize();
  return mesh;
}

namespace detail {

// Closest point on a triangle (Voronoi-region case analysis).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));
  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

struct Aabb {
  Vec3 lo{1e300, 1e300, 1e300};
  Vec3 hi{-1e300, -1e300, -1e300};
  void grow(const Vec3& p) {
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  }
  double dist2(const Vec3& p) const {
    double s = 0.0;
    for (int d = 0; d < 3; ++d) {
      const double e = std::max({lo[d] - p[d], 0.0, p[d] - hi[d]});
      s += e * e;
    }
    return s;
  }
  // slab test for an axis ray from origin o along unit direction dir, t > 0
  bool hit_by_ray(const Vec3& o, const Vec3& dir) const {
    double tmin = 0.0, tmax = 1e300;
    for (int d = 0; d < 3; ++d) {
      if (std::abs(dir[d]) < 1e-300) {
        if (o[d] < lo[d] || o[d] > hi[d]) return false;
        continue;
      }
      double t0 = (lo[d] - o[d]) / dir[d];
      double t1 = (hi[d] - o[d]) / dir[d];
      if (t0 > t1) std::swap(t0, t1);
      tmin = std::max(tmin, t0);
      tmax = std::min(tmax, t1);
      if (tmin > tmax) return false;
    }
    return true;
  }
};

}  // namespace detail

// Median-split bounding-volume tree over the mesh triangles; supports exact
// nearest-triangle queries and ray crossing counts.
class MeshBvh {
 public:
  explicit MeshBvh(const ReferenceMesh& mesh) : mesh_(&mesh) {
    tris_.resize(mesh.triangles.size());
    for (std::size_t i = 0; i < tris_.size(); ++i) tris_[i] = static_cast<int>(i);
    nodes_.reserve(2 * tris_.size());
    build(0, static_cast<int>(tris_.size()));
  }

  // squared distance and the closest point
  double nearest2(const Vec3& p, Vec3* closest = nullptr) const {
    double best = 1e300;
    Vec3 cp{};
    nearest_rec(0, p, best, cp);
    if (closest) *closest = cp;
    return best;
  }

  struct CrossingCount {
    int crossings = 0;
    bool ambiguous = false;
  };

  // counts t>0 crossings of the ray; flags hits too close to edges,
  // vertices, the ray origin, or parallel configurations
  CrossingCount count_crossings(const Vec3& o, const Vec3& dir) const {
    CrossingCount cc;
    crossings_rec(0, o, dir, cc);
    return cc;
  }

 private:
  struct Node {
    detail::Aabb box;
    int left = -1, right = -1;  // children, or leaf range below
    int first = 0, count = 0;
  };

  int build(int first, int count) {
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    detail::Aabb box;
    for (int i = first; i < first + count; ++i)
      for (int v : mesh_->triangles[tris_[i]]) box.grow(mesh_->vertices[v]);
    nodes_[self].box = box;
    if (count <= 4) {
      nodes_[self].first = first;
      nodes_[self].count = count;
      return self;
    }
    int axis = 0;
    const Vec3 ext = box.hi - box.lo;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    const int mid = first + count / 2;
    std::nth_element(tris_.begin() + first, tris_.begin() + mid, tris_.begin() + first + count,
                     [&](int ta, int tb) {
                       return centroid(ta)[axis] < centroid(tb)[axis];
                     });
    const int l = build(first, mid - first);
    const int r = build(mid, first + count - mid);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  Vec3 centroid(int t) const {
    const auto& tr = mesh_->triangles[t];
    return (mesh_->vertices[tr[0]] + mesh_->vertices[tr[1]] + mesh_->vertices[tr[2]]) / 3.0;
  }

  void nearest_rec(int ni, const Vec3& p, double& best, Vec3& cp) const {
    const Node& n = nodes_[ni];
    if (n.box.dist2(p) >= best) return;
    if (n.left < 0) {
      for (int i = n.first; i < n.first + n.count; ++i) {
        const auto& tr = mesh_->triangles[tris_[i]];
        const Vec3 c = detail::closest_point_on_triangle(p, mesh_->vertices[tr[0]],
                                                         mesh_->vertices[tr[1]], mesh_->vertices[tr[2]]);
        const double d2 = norm2(c - p);
        if (d2 < best) {
          best = d2;
          cp = c;
        }
      }
      return;
    }
    const double dl = nodes_[n.left].box.dist2(p);
    const double dr = nodes_[n.right].box.dist2(p);
    if (dl < dr) {
      nearest_rec(n.left, p, best, cp);
      nearest_rec(n.right, p, best, cp);
    } else {
      nearest_rec(n.right, p, best, cp);
      nearest_rec(n.left, p, best, cp);
    }
  }

  void crossings_rec(int ni, const Vec3& o, const Vec3& dir, CrossingCount& cc) const {
    const Node& n = nodes_[ni];
    if (!n.box.hit_by_ray(o, dir)) return;
    if (n.left < 0) {
      for (int i = n.first; i < n.first + n.count; ++i) {
        const auto& tr = mesh_->triangles[tris_[i]];
        intersect(o, dir, mesh_->vertices[tr[0]], mesh_->vertices[tr[1]], mesh_->vertices[tr[2]], cc);
      }
      return;
    }
    crossings_rec(n.left, o, dir, cc);
    crossings_rec(n.right, o, dir, cc);
  }

  // Moeller-Trumbore with conservative ambiguity margins.
  static void intersect(const Vec3& o, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c,
                        CrossingCount& cc) {
    constexpr double eps_bary = 1e-9;
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 pv = cross(dir, e2);
    const double det = dot(e1, pv);
    const double scale = std::max({std::abs(e1.x), std::abs(e1.y), std::abs(e1.z), std::abs(e2.x),
                                   std::abs(e2.y), std::abs(e2.z), 1e-30});
    if (std::abs(det) < 1e-14 * scale * scale) return;  // parallel; no transversal crossing
    const double inv = 1.0 / det;
    const Vec3 tv = o - a;
    const double u = dot(tv, pv) * inv;
    const Vec3 qv = cross(tv, e1);
    const double v = dot(dir, qv) * inv;
    const double t = dot(e2, qv) * inv;
    const bool inside = u > eps_bary && v > eps_bary && u + v < 1.0 - eps_bary && t > eps_bary;
    const bool outside = u < -eps_bary || v < -eps_bary || u + v > 1.0 + eps_bary || t < -eps_bary;
    if (inside)
      ++cc.crossings;
    else if (!outside)
      cc.ambiguous = true;  // grazing an edge, vertex, or the origin
  }

  const ReferenceMesh* mesh_;
  std::vector<int> tris_;
  std::vector<Node> nodes_;
};

// |d| is the exact point-to-mesh distance; the sign comes from the parity of
// ray crossings, majority-voted over three axis rays, with deterministic
// jittered retries when every ray grazes an edge or vertex.
inline double signed_distance_to_mesh(const MeshBvh& bvh, const Vec3& x) {
  const double dist = std::sqrt(bvh.nearest2(x));
  if (dist < 1e-13) return 0.0;

  const Vec3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  int inside_votes = 0, valid = 0;
  for (const Vec3& d : axes) {
    const auto cc = bvh.count_crossings(x, d);
    if (cc.ambiguous) continue;
    ++valid;
    if (cc.crossings % 2 == 1) ++inside_votes;
  }
  if (valid == 0) {
    CounterRng rng(fnv1a64(&x, sizeof(x)), 0x51);
    for (int retry = 0; retry < 10 && valid == 0; ++retry) {
      for (int r = 0; r < 3; ++r) {
        Vec3 d{rng.normal(), rng.normal(), rng.normal()};
        if (norm(d) < 1e-9) continue;
        const auto cc = bvh.count_crossings(x, normalized(d));
        if (cc.ambiguous) continue;
        ++valid;
        if (cc.crossings % 2 == 1) ++inside_votes;
      }
    }
    if (valid == 0)
      throw Error(ErrorKind::SignAmbiguous, "all sign-probe rays grazed edges or vertices");
  }
  return 2 * inside_votes > valid ? -dist : dist;
}

inline double signed_distance_to_mesh(const ReferenceMesh& mesh, const Vec3& x) {
  const MeshBvh bvh(mesh);
  return signed_distance_to_mesh(bvh, x);
}

// Area-weighted uniform samples on the mesh surface.
inline std::vector<Vec3> sample_mesh_surface(const ReferenceMesh& mesh, std::size_t n,
                                             std::uint64_t seed) {
  std::vector<double> cum(mesh.face_areas.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.face_areas.size(); ++i) {
    total += mesh.face_areas[i];
    cum[i] = total;
  }
  CounterRng rng(seed, 0x3E5);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) {
    const double u = rng.next_double() * total;
    const std::size_t f =
        static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    const auto& t = mesh.triangles[std::min(f, mesh.triangles.size() - 1)];
    const double r1 = std::sqrt(rng.next_open());
    const double r2 = rng.next_double();
    const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
    p = a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2);
  }
  return pts;
}

// Mean squared field value over on-surface samples.
inline double e_recon_surface(const SampledFieldFn& phi, const ReferenceMesh& mesh,
                              std::size_t n_samples = 50000, std::uint64_t seed = 0) {
  const auto pts = sample_mesh_surface(mesh, n_samples, seed);
  double s = 0.0;
  for (const Vec3& p : pts) {
    const double v = phi(p).value;
    s += v * v;
  }
  return s / static_cast<double>(n_samples);
}

// Cosine distance between face normals and normalized field gradients at the
// face centers; zero-gradient centers are excluded and counted.
inline double e_recon_normal(const SampledFieldFn& phi, const ReferenceMesh& mesh,
                             std::size_t* excluded = nullptr) {
  double s = 0.0;
  std::size_t used = 0, skipped = 0;
  for (std::size_t f = 0; f < mesh.face_centers.size(); ++f) {
    const FieldSample smp = phi(mesh.face_centers[f]);
    const double len = norm(smp.gradient);
    if (len < 1e-14) {
      ++skipped;
      continue;
    }
    s += dot(mesh.face_normals[f], smp.gradient / len);
    ++used;
  }
  if (excluded) *excluded = skipped;
  if (used == 0) return 1.0;
  return 1.0 - s / static_cast<double>(used);
}

// Mean absolute deviation from the ground-truth signed distance on the band.
inline double e_sdf(const SampledFieldFn& phi, std::span<const Vec3> band,
                    const std::function<double(const Vec3&)>& reference_distance) {
  double s = 0.0;
  for (const Vec3& p : band) s += std::abs(phi(p).value - reference_distance(p));
  return s / static_cast<double>(band.size());
}

// Median eikonal residual |1 - |grad phi||; for an even count the lower
// middle element is taken.
inline double e_eik(const SampledFieldFn& phi, std::span<const Vec3> band) {
  std::vector<double> res;
  res.reserve(band.size());
  for (const Vec3& p : band) res.push_back(std::abs(1.0 - norm(phi(p).gradient)));
  std::sort(res.begin(), res.end());
  return res[(res.size() - 1) / 2];
}

struct MetricsReport {
  double e_recon_surface = 0.0;
  double e_recon_normal = 0.0;
  double e_sdf = 0.0;
  double e_eik = 0.0;
  std::size_t surface_samples = 0;
  std::size_t band_points = 0;
  std::size_t excluded_centers = 0;
  std::uint64_t seed = 0;
};

// Band files are keyed by the mesh digest so every evaluation of a model
// shares the same narrow-band point set.
inline void save_band(std::span<const Vec3> pts, double band, std::uint64_t mesh_digest,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write("HSBAND1\0", 8);
  const std::uint64_t n = pts.size();
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&band), 8);
  out.write(reinterpret_cast<const char*>(&mesh_digest), 8);
  out.write(reinterpret_cast<const char*>(pts.data()), static_cast<std::streamsize>(n * sizeof(Vec3)));
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

inline std::vector<Vec3> load_band(const std::filesystem::path& path, std::uint64_t expected_digest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileNotFound, "band file not found: " + path.string());
  char magic[8];
  std::uint64_t n = 0, digest = 0;
  double band = 0.0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&n), 8);
  in.read(reinterpret_cast<char*>(&band), 8);
  in.read(reinterpret_cast<char*>(&digest), 8);
  if (!in || std::memcmp(magic, "HSBAND1\0", 8) != 0)
    throw Error(ErrorKind::VersionMismatch, path.string() + ": not a band file");
  if (digest != expected_digest)
    throw Error(ErrorKind::VersionMismatch, path.string() + ": band belongs to a different mesh");
  std::vector<Vec3> pts(n);
  in.read(reinterpret_cast<char*>(pts.data()), static_cast<std::streamsize>(n * sizeof(Vec3)));
  if (!in) throw Error(ErrorKind::CorruptBlob, path.string() + ": truncated band payload");
  return pts;
}

// Loads the band set for this mesh, generating and persisting it on first
// use ("generated once per model").
inline std::vector<Vec3> load_or_create_band(const ReferenceMesh& mesh, const MeshBvh& bvh,
                                             const std::filesystem::path& path, double band = 0.1,
                                             std::size_t n = 10000, std::uint64_t seed = 0) {
  const std::uint64_t digest = mesh.digest();
  if (std::filesystem::exists(path)) return load_band(path, digest);
  CounterRng rng(seed, 0xBA4D);
  const auto pts = sample_narrow_band(
      [&](const Vec3& p) { return signed_distance_to_mesh(bvh, p); }, band, n, rng);
  save_band(pts, band, digest, path);
  return pts;
}

inline MetricsReport evaluate_metrics(const SampledFieldFn& phi, const ReferenceMesh& mesh,
                                      const MeshBvh& bvh, std::span<const Vec3> band,
                                      std::size_t surface_samples = 50000, std::uint64_t seed = 0) {
  MetricsReport r;
  r.seed = seed;
  r.surface_samples = surface_samples;
  r.band_points = band.size();
  r.e_recon_surface = e_recon_surface(phi, mesh, surface_samples, seed);
  r.e_recon_normal = e_recon_normal(phi, mesh, &r.excluded_centers);
  r.e_sdf = e_sdf(phi, band, [&](const Vec3& p) { return signed_distance_to_mesh(bvh, p); });
  r.e_eik = e_eik(phi, band);
  return r;
}

}  // namespace heatsdf
