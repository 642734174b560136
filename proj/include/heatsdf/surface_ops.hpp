#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

#include "heatsdf/core.hpp"
#include "heatsdf/mc_tables.hpp"
#include "heatsdf/metrics.hpp"
#include "heatsdf/neuralfield.hpp"
#include "heatsdf/sampling.hpp"
#include "heatsdf/sdfstage.hpp"
#include "heatsdf/training.hpp"

namespace heatsdf {

struct ExtractedMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
};

// Marching cubes over a resolution^3 node sampling of the domain with linear
// edge interpolation. Triangles are emitted with outward orientation for
// SDF-convention inputs (negative inside). Memory stays O(resolution^2) via
// slab rolling.
inline ExtractedMesh marching_cubes(const std::function<double(const Vec3&)>& field, int resolution,
                                    double iso = 0.0) {
  if (resolution < 8) throw Error(ErrorKind::ConfigInvalid, "marching cubes needs resolution >= 8");
  const int n = resolution;
  const double h = domain_edge / (n - 1);
  auto node = [&](int i, int j, int k) {
    return Vec3{-domain_half + i * h, -domain_half + j * h, -domain_half + k * h};
  };
  const std::size_t slab = static_cast<std::size_t>(n) * n;
  auto at = [&](int i, int j) { return static_cast<std::size_t>(i) * n + j; };

  std::vector<double> v_lo(slab), v_hi(slab);
  std::vector<int> xe_lo(slab, -1), xe_hi(slab, -1), ye_lo(slab, -1), ye_hi(slab, -1), ze(slab, -1);

  ExtractedMesh mesh;
  auto edge_vertex = [&](const Vec3& a, const Vec3& b, double va, double vb) {
    const double t = (iso - va) / (vb - va);
    mesh.vertices.push_back(a + (b - a) * t);
    return static_cast<int>(mesh.vertices.size()) - 1;
  };

  auto fill_slab = [&](int k, std::vector<double>& v) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) v[at(i, j)] = field(node(i, j, k));
  };
  auto fill_in_slab_edges = [&](int k, const std::vector<double>& v, std::vector<int>& xe,
                                std::vector<int>& ye) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        xe[at(i, j)] = ye[at(i, j)] = -1;
        if (i + 1 < n) {
          const double a = v[at(i, j)], b = v[at(i + 1, j)];
          if ((a < iso) != (b < iso)) xe[at(i, j)] = edge_vertex(node(i, j, k), node(i + 1, j, k), a, b);
        }
        if (j + 1 < n) {
          const double a = v[at(i, j)], b = v[at(i, j + 1)];
          if ((a < iso) != (b < iso)) ye[at(i, j)] = edge_vertex(node(i, j, k), node(i, j + 1, k), a, b);
        }
      }
  };

  fill_slab(0, v_lo);
  fill_in_slab_edges(0, v_lo, xe_lo, ye_lo);

  for (int k = 0; k + 1 < n; ++k) {
    fill_slab(k + 1, v_hi);
    fill_in_slab_edges(k + 1, v_hi, xe_hi, ye_hi);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        ze[at(i, j)] = -1;
        const double a = v_lo[at(i, j)], b = v_hi[at(i, j)];
        if ((a < iso) != (b < iso)) ze[at(i, j)] = edge_vertex(node(i, j, k), node(i, j, k + 1), a, b);
      }

    for (int i = 0; i + 1 < n; ++i)
      for (int j = 0; j + 1 < n; ++j) {
        int casecode = 0;
        if (v_lo[at(i, j)] < iso) casecode |= 1;
        if (v_lo[at(i + 1, j)] < iso) casecode |= 2;
        if (v_lo[at(i + 1, j + 1)] < iso) casecode |= 4;
        if (v_lo[at(i, j + 1)] < iso) casecode |= 8;
        if (v_hi[at(i, j)] < iso) casecode |= 16;
        if (v_hi[at(i + 1, j)] < iso) casecode |= 32;
        if (v_hi[at(i + 1, j + 1)] < iso) casecode |= 64;
        if (v_hi[at(i, j + 1)] < iso) casecode |= 128;
        if (casecode == 0 || casecode == 255) continue;

        const int edge_to_vertex[12] = {
            xe_lo[at(i, j)], ye_lo[at(i + 1, j)], xe_lo[at(i, j + 1)], ye_lo[at(i, j)],
            xe_hi[at(i, j)], ye_hi[at(i + 1, j)], xe_hi[at(i, j + 1)], ye_hi[at(i, j)],
            ze[at(i, j)],    ze[at(i + 1, j)],    ze[at(i + 1, j + 1)], ze[at(i, j + 1)]};
        const auto& tris = detail::mc_triangles[casecode];
        for (int t = 0; tris[t] != -1; t += 3) {
          const int a = edge_to_vertex[tris[t]];
          const int b = edge_to_vertex[tris[t + 1]];
          const int c = edge_to_vertex[tris[t + 2]];
          mesh.triangles.push_back({a, c, b});
        }
      }
    v_lo.swap(v_hi);
    xe_lo.swap(xe_hi);
    ye_lo.swap(ye_hi);
  }
  if (mesh.triangles.empty())
    throw Error(ErrorKind::EmptyLevelSet, "no sign change of the field anywhere in the domain");
  return mesh;
}

enum class CsgOp { Union, Intersection };

// Pointwise min/max of two implicit fields. The result represents the
// boolean combination of the sublevel sets but is in general not an SDF.
inline std::function<double(const Vec3&)> csg_combine(std::function<double(const Vec3&)> a,
                                                      std::function<double(const Vec3&)> b,
                                                      CsgOp op) {
  if (op == CsgOp::Union)
    return [a = std::move(a), b = std::move(b)](const Vec3& p) { return std::min(a(p), b(p)); };
  return [a = std::move(a), b = std::move(b)](const Vec3& p) { return std::max(a(p), b(p)); };
}

inline void export_mesh(const ExtractedMesh& mesh, const std::filesystem::path& path) {
  for (const Vec3& v : mesh.vertices)
    if (!finite(v)) throw Error(ErrorKind::IoError, "mesh has non-finite vertices");
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.precision(17);
  for (const Vec3& v : mesh.vertices) out << "v " << v.x << " " << v.y << " " << v.z << "\n";
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

// Plateau profile for confining the flow to a band around the zero level:
// 1 on [-sigma/2, sigma/2], 0 outside (-sigma, sigma), cubic Hermite joins.
inline double mu_sigma(double s, double sigma) {
  return eta_delta(std::abs(s) - 0.75 * sigma, 0.25 * sigma);
}

struct LevelSetState {
  NeuralField w;
  int step_index = 0;
  double tau_pde = 0.01;
  double sigma = 0.05;
};

// Energy of the implicit level-set heat step, confined to the band:
//   |Omega| * mean( mu_sigma(phi) [ (w - w_k)^2 + tau (|grad w|^2 - (q . grad w)^2) ] )
// with q = grad phi, optionally renormalized where |grad phi| > 0.5.
inline double flow_energy(const NeuralField& w, const SampledFieldFn& w_prev,
                          const SampledFieldFn& phi, const VolumeBatch& vol, double tau_pde,
                          double sigma, bool renormalize, std::span<double> grad_accum) {
  const double sv = vol.volume / static_cast<double>(vol.points.size());
  return batch_backprop(
      w, vol.points,
      [&](std::size_t i, const FieldSample& s, double& va, Vec3& ga) {
        const FieldSample sp = phi(vol.points[i]);
        const double mu = mu_sigma(sp.value, sigma);
        if (mu == 0.0) return 0.0;
        Vec3 q = sp.gradient;
        if (renormalize) {
          const double len = norm(q);
          if (len > 0.5) q = q / len;
        }
        const double wk = w_prev(vol.points[i]).value;
        const double fid = s.value - wk;
        const double qg = dot(q, s.gradient);
        va = sv * mu * 2.0 * fid;
        ga = (sv * mu * 2.0 * tau_pde) * (s.gradient - qg * q);
        return sv * mu * (fid * fid + tau_pde * (norm2(s.gradient) - qg * qg));
      },
      grad_accum);
}

// One minimizing-movement step of heat flow on the level sets of phi: trains
// a fresh network warm-started from w_k.
inline NeuralField surface_heat_flow_step(const SampledFieldFn& phi, const NeuralField& w_k,
                                          double tau_pde, double sigma,
                                          const TrainSchedule& schedule, std::size_t volume_samples,
                                          std::uint64_t seed, bool renormalize = false) {
  auto prev_eval = std::make_shared<FieldEvaluator>(w_k);
  const SampledFieldFn w_prev = [prev_eval](const Vec3& x) {
    return FieldSample{prev_eval->value(x), {0, 0, 0}};
  };
  const BatchLossFn loss = [&](const NeuralField& f, std::uint64_t s, std::uint64_t step,
                               std::span<double> grad) {
    CounterRng rng(s, step * 4 + 1);
    const VolumeBatch vol = sample_volume(rng, volume_samples);
    return flow_energy(f, w_prev, phi, vol, tau_pde, sigma, renormalize, grad);
  };
  return train(w_k, loss, schedule, seed).field;
}

// L2-fits a network to a target function over the domain; used to build the
// initial data for the flow (e.g. a smoothed ball indicator).
inline NeuralField fit_field_to_function(const std::function<double(const Vec3&)>& target,
                                         const Architecture& arch, const TrainSchedule& schedule,
                                         std::size_t volume_samples, std::uint64_t seed) {
  const BatchLossFn loss = [&](const NeuralField& f, std::uint64_t s, std::uint64_t step,
                               std::span<double> grad) {
    CounterRng rng(s, step * 4 + 1);
    const VolumeBatch vol = sample_volume(rng, volume_samples);
    const double sv = vol.volume / static_cast<double>(vol.points.size());
    return batch_backprop_values(
        f, vol.points,
        [&](std::size_t i, double v, double& va) {
          const double d = v - target(vol.points[i]);
          va = 2.0 * sv * d;
          return sv * d * d;
        },
        grad);
  };
  return train(init_siren(arch, seed), loss, schedule, seed).field;
}

// Smoothed indicator of a ball: 1 inside, 0 outside, C1 transition of
// half-width delta.
inline std::function<double(const Vec3&)> ball_indicator(const Vec3& center, double radius,
                                                         double delta = 0.01) {
  return [=](const Vec3& x) { return eta_delta(norm(x - center) - radius, delta); };
}

}  // namespace heatsdf
