#pragma once

#include <map>

#include "heatsdf/metrics.hpp"

namespace testutil {

using heatsdf::ReferenceMesh;
using heatsdf::Vec3;

// Axis-aligned cube of half-extent h, outward-oriented, 12 triangles.
inline ReferenceMesh cube_mesh(double h = 0.5) {
  ReferenceMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.push_back({(i & 1) ? h : -h, (i & 2) ? h : -h, (i & 4) ? h : -h});
  const int faces[6][4] = {
      {1, 3, 7, 5},  // +x
      {0, 4, 6, 2},  // -x
      {2, 6, 7, 3},  // +y
      {0, 1, 5, 4},  // -y
      {4, 5, 7, 6},  // +z
      {0, 2, 3, 1},  // -z
  };
  for (const auto& f : faces) {
    m.triangles.push_back({f[0], f[1], f[2]});
    m.triangles.push_back({f[0], f[2], f[3]});
  }
  m.finalize();
  return m;
}

// Icosahedron subdivided `subdiv` times and projected to radius r;
// subdiv = 3 gives 1280 faces.
inline ReferenceMesh icosphere_mesh(double r = 0.5, int subdiv = 3) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {{-1, t, 0},  {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                             {0, -1, t},  {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                             {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v = heatsdf::normalized(v) * r;
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},   {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdiv; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back(heatsdf::normalized(verts[a] + verts[b]) * r);
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  ReferenceMesh m;
  m.vertices = std::move(verts);
  m.triangles = std::move(faces);
  m.finalize();
  return m;
}

}  // namespace testutil
