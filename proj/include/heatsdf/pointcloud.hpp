#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "heatsdf/core.hpp"

namespace heatsdf {

// Isotropic scale plus translation: y = scale * x + translation.
struct NormalizationTransform {
  double scale = 1.0;
  Vec3 translation{0.0, 0.0, 0.0};

  Vec3 apply(const Vec3& x) const { return x * scale + translation; }
  Vec3 inverse(const Vec3& y) const { return (y - translation) / scale; }
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<double> weights;
  double epsilon = 0.0;  // mollifier radius; 0 means not selected yet
  NormalizationTransform transform;

  std::size_t size() const { return points.size(); }
};

enum class CloudFormat { XYZ, PLY, OBJ };

namespace detail {

// Uniform grid over the point bounding box with exact 21-bit packed keys,
// stored CSR-style so queries iterate points in a fixed order.
class SpatialHash {
 public:
  SpatialHash(const std::vector<Vec3>& pts, double cell) : pts_(&pts), cell_(cell) {
    lo_ = pts[0];
    for (const Vec3& p : pts) {
      lo_.x = std::min(lo_.x, p.x);
      lo_.y = std::min(lo_.y, p.y);
      lo_.z = std::min(lo_.z, p.z);
    }
    std::vector<std::pair<std::uint64_t, std::uint32_t>> entries(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) entries[i] = {key_of(pts[i]), static_cast<std::uint32_t>(i)};
    std::sort(entries.begin(), entries.end());
    keys_.reserve(entries.size());
    starts_.reserve(entries.size() + 1);
    order_.resize(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (i == 0 || entries[i].first != entries[i - 1].first) {
        keys_.push_back(entries[i].first);
        starts_.push_back(static_cast<std::uint32_t>(i));
      }
      order_[i] = entries[i].second;
    }
    starts_.push_back(static_cast<std::uint32_t>(entries.size()));
  }

  std::int64_t coord(double v, double origin) const {
    return static_cast<std::int64_t>(std::floor((v - origin) / cell_));
  }

  void cell_of(const Vec3& p, std::int64_t c[3]) const {
    c[0] = coord(p.x, lo_.x);
    c[1] = coord(p.y, lo_.y);
    c[2] = coord(p.z, lo_.z);
  }

  // Visit point indices in the given cell, in index-sorted order.
  template <class Fn>
  void for_cell(std::int64_t ix, std::int64_t iy, std::int64_t iz, Fn&& fn) const {
    const std::uint64_t k = pack(ix, iy, iz);
    const auto it = std::lower_bound(keys_.begin(), keys_.end(), k);
    if (it == keys_.end() || *it != k) return;
    const std::size_t b = static_cast<std::size_t>(it - keys_.begin());
    for (std::uint32_t i = starts_[b]; i < starts_[b + 1]; ++i) fn(order_[i]);
  }

  double cell_size() const { return cell_; }

 private:
  std::uint64_t key_of(const Vec3& p) const {
    std::int64_t c[3];
    cell_of(p, c);
    return pack(c[0], c[1], c[2]);
  }

  static std::uint64_t pack(std::int64_t ix, std::int64_t iy, std::int64_t iz) {
    // offset into non-negative range; inputs stay well below 2^20 per axis
    const std::uint64_t mask = (1ull << 21) - 1;
    return ((static_cast<std::uint64_t>(ix + (1 << 20)) & mask) << 42) |
           ((static_cast<std::uint64_t>(iy + (1 << 20)) & mask) << 21) |
           (static_cast<std::uint64_t>(iz + (1 << 20)) & mask);
  }

  const std::vector<Vec3>* pts_;
  double cell_;
  Vec3 lo_;
  std::vector<std::uint64_t> keys_;
  std::vector<std::uint32_t> starts_;
  std::vector<std::uint32_t> order_;
};

inline void parse_xyz_line(const std::string& line, std::size_t lineno, std::vector<Vec3>& out) {
  std::istringstream ss(line);
  Vec3 p;
  if (!(ss >> p.x >> p.y >> p.z))
    throw Error(ErrorKind::ParseError, "xyz parse error at line " + std::to_string(lineno));
  out.push_back(p);
}

struct PlyProperty {
  std::string type;
  std::string name;
  bool is_list = false;
  std::string count_type;
};

inline std::size_t ply_type_size(const std::string& t, std::size_t lineno) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  throw Error(ErrorKind::ParseError, "unknown ply type '" + t + "' in header line " + std::to_string(lineno));
}

inline double ply_read_scalar(std::istream& in, const std::string& type, std::size_t lineno) {
  unsigned char buf[8];
  const std::size_t n = ply_type_size(type, lineno);
  in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
  if (!in) throw Error(ErrorKind::ParseError, "truncated ply payload");
  auto le = [&](int bytes) {
    std::uint64_t v = 0;
    for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
  };
  if (type == "float" || type == "float32") {
    const std::uint32_t bits = static_cast<std::uint32_t>(le(4));
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  if (type == "double" || type == "float64") {
    const std::uint64_t bits = le(8);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }
  if (type == "char" || type == "int8") return static_cast<std::int8_t>(buf[0]);
  if (type == "short" || type == "int16") return static_cast<std::int16_t>(le(2));
  if (type == "int" || type == "int32") return static_cast<std::int32_t>(le(4));
  return static_cast<double>(le(n == 1 ? 1 : n == 2 ? 2 : 4));
}

inline std::vector<Vec3> load_ply(std::ifstream& in, const std::string& path) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, path + ": truncated ply header");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  if (next_line() != "ply") throw Error(ErrorKind::ParseError, path + ": missing ply magic at line 1");

  bool binary = false;
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
  };
  std::vector<Element> elements;
  while (true) {
    std::istringstream ss(next_line());
    std::string tok;
    ss >> tok;
    if (tok == "end_header") break;
    if (tok == "comment" || tok == "obj_info" || tok.empty()) continue;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii")
        binary = false;
      else if (fmt == "binary_little_endian")
        binary = true;
      else
        throw Error(ErrorKind::ParseError,
                    path + ": unsupported ply format '" + fmt + "' at line " + std::to_string(lineno));
    } else if (tok == "element") {
      Element e;
      ss >> e.name >> e.count;
      elements.push_back(e);
    } else if (tok == "property") {
      if (elements.empty())
        throw Error(ErrorKind::ParseError, path + ": property before element at line " + std::to_string(lineno));
      PlyProperty p;
      ss >> p.type;
      if (p.type == "list") {
        p.is_list = true;
        ss >> p.count_type >> p.type >> p.name;
      } else {
        ss >> p.name;
      }
      elements.back().props.push_back(p);
    } else {
      throw Error(ErrorKind::ParseError,
                  path + ": unexpected header token '" + tok + "' at line " + std::to_string(lineno));
    }
  }

  std::vector<Vec3> pts;
  for (const auto& e : elements) {
    if (e.name != "vertex") {
      std::cerr << "warning: ignoring ply element '" << e.name << "' (" << e.count << " entries)\n";
      // still must consume its payload
      for (std::size_t i = 0; i < e.count; ++i) {
        if (binary) {
          for (const auto& p : e.props) {
            if (p.is_list) {
              const double cnt = ply_read_scalar(in, p.count_type, lineno);
              for (std::size_t j = 0; j < static_cast<std::size_t>(cnt); ++j)
                ply_read_scalar(in, p.type, lineno);
            } else {
              ply_read_scalar(in, p.type, lineno);
            }
          }
        } else {
          next_line();
        }
      }
      continue;
    }
    int ix = -1, iy = -1, iz = -1;
    for (std::size_t k = 0; k < e.props.size(); ++k) {
      if (e.props[k].name == "x") ix = static_cast<int>(k);
      if (e.props[k].name == "y") iy = static_cast<int>(k);
      if (e.props[k].name == "z") iz = static_cast<int>(k);
    }
    if (ix < 0 || iy < 0 || iz < 0)
      throw Error(ErrorKind::ParseError, path + ": vertex element lacks x/y/z properties");
    pts.reserve(e.count);
    for (std::size_t i = 0; i < e.count; ++i) {
      Vec3 p;
      if (binary) {
        for (std::size_t k = 0; k < e.props.size(); ++k) {
          if (e.props[k].is_list)
            throw Error(ErrorKind::ParseError, path + ": list property on vertex element unsupported");
          const double v = ply_read_scalar(in, e.props[k].type, lineno);
          if (static_cast<int>(k) == ix) p.x = v;
          if (static_cast<int>(k) == iy) p.y = v;
          if (static_cast<int>(k) == iz) p.z = v;
        }
      } else {
        std::istringstream ss(next_line());
        for (std::size_t k = 0; k < e.props.size(); ++k) {
          double v;
          if (!(ss >> v))
            throw Error(ErrorKind::ParseError, path + ": vertex parse error at line " + std::to_string(lineno));
          if (static_cast<int>(k) == ix) p.x = v;
          if (static_cast<int>(k) == iy) p.y = v;
          if (static_cast<int>(k) == iz) p.z = v;
        }
      }
      pts.push_back(p);
    }
  }
  return pts;
}

}  // namespace detail

inline PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorKind::FileNotFound, "point cloud file not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());

  std::vector<Vec3> pts;
  if (format == CloudFormat::PLY) {
    pts = detail::load_ply(in, path.string());
  } else {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (format == CloudFormat::OBJ) {
        if (line.size() > 1 && line[0] == 'v' && (line[1] == ' ' || line[1] == '\t'))
          detail::parse_xyz_line(line.substr(2), lineno, pts);
        // faces, normals, texcoords and comments are ignored
      } else {
        if (line[0] == '#') continue;
        detail::parse_xyz_line(line, lineno, pts);
      }
    }
  }

  if (pts.size() < 4)
    throw Error(ErrorKind::TooFewPoints,
                path.string() + ": need at least 4 points, got " + std::to_string(pts.size()));
  PointCloud pc;
  pc.points = std::move(pts);
  pc.weights.assign(pc.points.size(), 1.0 / static_cast<double>(pc.points.size()));
  return pc;
}

inline void save_xyz(const PointCloud& pc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.precision(17);
  for (const Vec3& p : pc.points) out << p.x << " " << p.y << " " << p.z << "\n";
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

// Scales and centers the cloud so its bounding box is centered at the origin
// with max half-extent exactly 1. The transform is recorded for export.
inline PointCloud normalize_to_domain(const PointCloud& pc) {
  Vec3 lo = pc.points[0], hi = pc.points[0];
  for (const Vec3& p : pc.points) {
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  }
  const Vec3 center = (lo + hi) * 0.5;
  const double hmax = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z}) * 0.5;
  if (hmax <= 0.0) throw Error(ErrorKind::DegenerateCloud, "point cloud has zero diameter");

  PointCloud out = pc;
  out.transform.scale = 1.0 / hmax;
  out.transform.translation = -center * out.transform.scale;
  for (Vec3& p : out.points) {
    p = out.transform.apply(p);
    for (int d = 0; d < 3; ++d) p[d] = std::clamp(p[d], -1.0, 1.0);
  }
  return out;
}

// Smallest radius (up to a 1.05 safety factor) such that the ball around
// every point contains at least k other points: the exact k-th-nearest
// -neighbor distance, maximized over points.
inline double select_epsilon(const PointCloud& pc, int k = 12) {
  const auto& pts = pc.points;
  const std::size_t n = pts.size();
  if (static_cast<std::size_t>(k) >= n)
    throw Error(ErrorKind::TooFewPoints, "select_epsilon needs more points than neighbors");
  if (k <= 0) return std::numeric_limits<double>::min();

  Vec3 lo = pts[0], hi = pts[0];
  for (const Vec3& p : pts) {
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  }
  const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z, 1e-300});
  const double cells = std::clamp(std::cbrt(static_cast<double>(n) / 4.0), 1.0, 256.0);
  detail::SpatialHash grid(pts, extent / cells * (1.0 + 1e-12));

  double max_kth = 0.0;
  std::vector<double> best;  // max-heap of the k smallest squared distances
  for (std::size_t i = 0; i < n; ++i) {
    best.clear();
    std::int64_t c[3];
    grid.cell_of(pts[i], c);
    const double cell = grid.cell_size();
    for (std::int64_t ring = 0;; ++ring) {
      bool any_cell = false;
      for (std::int64_t dx = -ring; dx <= ring; ++dx)
        for (std::int64_t dy = -ring; dy <= ring; ++dy)
          for (std::int64_t dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            grid.for_cell(c[0] + dx, c[1] + dy, c[2] + dz, [&](std::uint32_t j) {
              any_cell = true;
              if (j == i) return;
              const double d2 = norm2(pts[j] - pts[i]);
              if (best.size() < static_cast<std::size_t>(k)) {
                best.push_back(d2);
                std::push_heap(best.begin(), best.end());
              } else if (d2 < best.front()) {
                std::pop_heap(best.begin(), best.end());
                best.back() = d2;
                std::push_heap(best.begin(), best.end());
              }
            });
          }
      // cells at ring r+1 are at least r*cell away; safe to stop once the
      // current k-th distance cannot be beaten
      if (best.size() == static_cast<std::size_t>(k) &&
          std::sqrt(best.front()) <= static_cast<double>(ring) * cell)
        break;
      if (!any_cell && ring > 0 && static_cast<double>(ring - 1) * cell > extent * 1.7320508075688772 + cell)
        break;  // searched past the whole bounding box
    }
    if (best.size() != static_cast<std::size_t>(k))
      throw Error(ErrorKind::TooFewPoints, "neighbor search exhausted the grid");
    max_kth = std::max(max_kth, std::sqrt(best.front()));
  }
  return std::max(max_kth * 1.05, std::numeric_limits<double>::min());
}

// Compactly supported mollifier nu(s) = exp(1/(|s|^2 - 1)) for |s| < 1,
// zero otherwise; nu_eps(s) = eps^-3 nu(s/eps).
inline double mollifier(double dist2_over_eps2) {
  if (dist2_over_eps2 >= 1.0) return 0.0;
  return std::exp(1.0 / (dist2_over_eps2 - 1.0));
}

// Local adaptive weights: omega_i proportional to 1 / sum_j nu_eps(x_i - x_j),
// the j-sum including j = i, then normalized to sum 1.
inline PointCloud compute_adaptive_weights(const PointCloud& pc, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorKind::ConfigInvalid, "adaptive weights need eps > 0");
  const auto& pts = pc.points;
  const std::size_t n = pts.size();
  detail::SpatialHash grid(pts, eps * (1.0 + 1e-12));
  const double inv_eps2 = 1.0 / (eps * eps);

  PointCloud out = pc;
  out.epsilon = eps;
  out.weights.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t c[3];
    grid.cell_of(pts[i], c);
    double s = 0.0;
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz)
          grid.for_cell(c[0] + dx, c[1] + dy, c[2] + dz, [&](std::uint32_t j) {
            s += mollifier(norm2(pts[j] - pts[i]) * inv_eps2);
          });
    // the eps^-3 prefactor cancels in the normalization but is kept so the
    // non-normalized weights match their definition
    out.weights[i] = 1.0 / (s * (1.0 / (eps * eps * eps)));
    total += out.weights[i];
  }
  for (double& w : out.weights) w /= total;
  return out;
}

}  // namespace heatsdf
