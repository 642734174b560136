#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <vector>

#include "heatsdf/core.hpp"
#include "heatsdf/pointcloud.hpp"

namespace heatsdf {

enum class CellLabel : std::uint8_t { Interfacial = 0, Outside = 1, Inside = 2 };

// Regular-grid labeling of the domain into interfacial cells (touching the
// cloud), outside cells (B+) and inside cells (B-). Cells exactly tile the
// domain; with dims = 64 the edge length is 2.4/64 = 0.0375.
struct RegionMask {
  Vec3 grid_origin{-domain_half, -domain_half, -domain_half};
  double h = domain_edge / 64.0;
  int dims = 64;
  std::vector<CellLabel> labels;  // index (i*dims + j)*dims + k
  bool empty_interior = false;    // reported, not an error

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims + j) * dims + k;
  }
  CellLabel at(int i, int j, int k) const { return labels[index(i, j, k)]; }
  Vec3 center(int i, int j, int k) const {
    return {grid_origin.x + (i + 0.5) * h, grid_origin.y + (j + 0.5) * h,
            grid_origin.z + (k + 0.5) * h};
  }
  std::size_t count(CellLabel l) const {
    std::size_t n = 0;
    for (CellLabel c : labels)
      if (c == l) ++n;
    return n;
  }
};

// Steps 2 and 3 on a precomputed interfacial occupancy: flood the outside
// from the boundary (6-connected), everything else becomes inside. All
// non-interfacial boundary cells seed the flood so that the outside set is
// exactly the boundary-connected component, whatever the occupancy looks
// like; for clouds kept away from the domain boundary this coincides with
// growing from a single boundary cell.
inline RegionMask build_region_mask_from_occupancy(const std::vector<bool>& interfacial, int dims) {
  RegionMask mask;
  mask.dims = dims;
  mask.h = domain_edge / dims;
  mask.labels.assign(static_cast<std::size_t>(dims) * dims * dims, CellLabel::Inside);

  std::deque<std::array<int, 3>> queue;
  bool any_seed = false;
  for (int i = 0; i < dims; ++i)
    for (int j = 0; j < dims; ++j)
      for (int k = 0; k < dims; ++k) {
        const std::size_t idx = mask.index(i, j, k);
        if (interfacial[idx]) {
          mask.labels[idx] = CellLabel::Interfacial;
          continue;
        }
        const bool boundary = i == 0 || j == 0 || k == 0 || i == dims - 1 || j == dims - 1 || k == dims - 1;
        if (boundary) {
          mask.labels[idx] = CellLabel::Outside;
          queue.push_back({i, j, k});
          any_seed = true;
        }
      }
  if (!any_seed) throw Error(ErrorKind::NoOutsideSeed, "every boundary cell is interfacial");

  while (!queue.empty()) {
    const auto [i, j, k] = queue.front();
    queue.pop_front();
    const int nb[6][3] = {{i - 1, j, k}, {i + 1, j, k}, {i, j - 1, k},
                          {i, j + 1, k}, {i, j, k - 1}, {i, j, k + 1}};
    for (const auto& c : nb) {
      if (c[0] < 0 || c[1] < 0 || c[2] < 0 || c[0] >= dims || c[1] >= dims || c[2] >= dims) continue;
      const std::size_t idx = mask.index(c[0], c[1], c[2]);
      if (mask.labels[idx] == CellLabel::Inside) {
        mask.labels[idx] = CellLabel::Outside;
        queue.push_back({c[0], c[1], c[2]});
      }
    }
  }
  mask.empty_interior = mask.count(CellLabel::Inside) == 0;
  return mask;
}

// Step 1: a cell is interfacial iff its closed cell contains a cloud point.
// Cell bounds are computed as origin + i*h so that a point sitting exactly
// on a shared face marks both neighbors.
inline std::vector<bool> interfacial_occupancy(const PointCloud& pc, int dims) {
  const double h = domain_edge / dims;
  const Vec3 origin{-domain_half, -domain_half, -domain_half};
  std::vector<bool> occ(static_cast<std::size_t>(dims) * dims * dims, false);
  auto cell_index = [&](int i, int j, int k) {
    return (static_cast<std::size_t>(i) * dims + j) * dims + k;
  };
  for (const Vec3& p : pc.points) {
    int cand[3][3];
    int ncand[3];
    for (int d = 0; d < 3; ++d) {
      const int base = static_cast<int>(std::floor((p[d] - origin[d]) / h));
      ncand[d] = 0;
      for (int c = base - 1; c <= base + 1; ++c) {
        if (c < 0 || c >= dims) continue;
        const double lo = origin[d] + c * h;
        const double hi = origin[d] + (c + 1) * h;
        if (p[d] >= lo && p[d] <= hi) cand[d][ncand[d]++] = c;
      }
    }
    for (int a = 0; a < ncand[0]; ++a)
      for (int b = 0; b < ncand[1]; ++b)
        for (int c = 0; c < ncand[2]; ++c) occ[cell_index(cand[0][a], cand[1][b], cand[2][c])] = true;
  }
  return occ;
}

inline RegionMask build_region_mask(const PointCloud& pc, int dims = 64) {
  return build_region_mask_from_occupancy(interfacial_occupancy(pc, dims), dims);
}

// Cell centers carrying the given label, in lexicographic (i,j,k) order.
inline std::vector<Vec3> cells_of(const RegionMask& mask, CellLabel label) {
  std::vector<Vec3> out;
  for (int i = 0; i < mask.dims; ++i)
    for (int j = 0; j < mask.dims; ++j)
      for (int k = 0; k < mask.dims; ++k)
        if (mask.at(i, j, k) == label) out.push_back(mask.center(i, j, k));
  return out;
}

// All cell centers of a dims^3 grid over the domain (kappa evaluation grid).
inline std::vector<Vec3> grid_cell_centers(int dims) {
  const double h = domain_edge / dims;
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(dims) * dims * dims);
  for (int i = 0; i < dims; ++i)
    for (int j = 0; j < dims; ++j)
      for (int k = 0; k < dims; ++k)
        out.push_back({-domain_half + (i + 0.5) * h, -domain_half + (j + 0.5) * h,
                       -domain_half + (k + 0.5) * h});
  return out;
}

// Exact median nearest-neighbor spacing (spatial-hash accelerated).
inline double median_nn_spacing(const PointCloud& pc) {
  const auto& pts = pc.points;
  if (pts.size() < 2) return 0.0;
  Vec3 lo = pts[0], hi = pts[0];
  for (const Vec3& p : pts)
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z, 1e-300});
  const double cells = std::clamp(std::cbrt(static_cast<double>(pts.size()) / 4.0), 1.0, 256.0);
  detail::SpatialHash grid(pts, extent / cells * (1.0 + 1e-12));

  std::vector<double> nn(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::int64_t c[3];
    grid.cell_of(pts[i], c);
    double best = std::numeric_limits<double>::infinity();
    const double cell = grid.cell_size();
    for (std::int64_t ring = 0;; ++ring) {
      for (std::int64_t dx = -ring; dx <= ring; ++dx)
        for (std::int64_t dy = -ring; dy <= ring; ++dy)
          for (std::int64_t dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            grid.for_cell(c[0] + dx, c[1] + dy, c[2] + dz, [&](std::uint32_t j) {
              if (j != i) best = std::min(best, norm2(pts[j] - pts[i]));
            });
          }
      if (std::isfinite(best) && std::sqrt(best) <= static_cast<double>(ring) * cell) break;
      if (static_cast<double>(ring) * cell > 2.0 * extent && std::isfinite(best)) break;
    }
    nn[i] = std::sqrt(best);
  }
  std::sort(nn.begin(), nn.end());
  return nn[(nn.size() - 1) / 2];
}

struct MaskBuildReport {
  int dims = 64;
  int doublings = 0;
  bool empty_interior = false;
};

// Builds the mask, doubling the cell size (up to 3 times) when the cloud is
// too sparse for the current grid: empty interior, or median neighbor
// spacing above h.
inline RegionMask build_region_mask_auto(const PointCloud& pc, int dims, MaskBuildReport* report = nullptr) {
  const double spacing = median_nn_spacing(pc);
  MaskBuildReport rep;
  rep.dims = dims;
  RegionMask mask;
  for (int attempt = 0;; ++attempt) {
    mask = build_region_mask(pc, rep.dims);
    const bool too_sparse = mask.empty_interior || spacing > mask.h;
    if (!too_sparse || attempt >= 3 || rep.dims <= 8) break;
    rep.dims /= 2;
    ++rep.doublings;
  }
  rep.empty_interior = mask.empty_interior;
  if (report) *report = rep;
  return mask;
}

// Debug export: ASCII header, then "label run_length" pairs covering the
// labels in lexicographic cell order.
inline void export_mask_rle(const RegionMask& mask, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << "HSMASK1 " << mask.dims << " " << mask.h << " " << mask.grid_origin.x << " "
      << mask.grid_origin.y << " " << mask.grid_origin.z << "\n";
  std::size_t i = 0;
  while (i < mask.labels.size()) {
    std::size_t j = i;
    while (j < mask.labels.size() && mask.labels[j] == mask.labels[i]) ++j;
    out << static_cast<int>(mask.labels[i]) << " " << (j - i) << "\n";
    i = j;
  }
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

inline RegionMask import_mask_rle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, "mask file not found: " + path.string());
  std::string magic;
  RegionMask mask;
  in >> magic >> mask.dims >> mask.h >> mask.grid_origin.x >> mask.grid_origin.y >> mask.grid_origin.z;
  if (magic != "HSMASK1") throw Error(ErrorKind::ParseError, path.string() + ": bad mask header");
  mask.labels.reserve(static_cast<std::size_t>(mask.dims) * mask.dims * mask.dims);
  int label;
  std::size_t run;
  while (in >> label >> run)
    mask.labels.insert(mask.labels.end(), run, static_cast<CellLabel>(label));
  if (mask.labels.size() != static_cast<std::size_t>(mask.dims) * mask.dims * mask.dims)
    throw Error(ErrorKind::ParseError, path.string() + ": run lengths do not cover the grid");
  mask.empty_interior = mask.count(CellLabel::Inside) == 0;
  return mask;
}

}  // namespace heatsdf
