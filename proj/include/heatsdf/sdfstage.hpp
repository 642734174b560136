#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "heatsdf/core.hpp"
#include "heatsdf/heatstage.hpp"
#include "heatsdf/neuralfield.hpp"
#include "heatsdf/orientation.hpp"
#include "heatsdf/sampling.hpp"
#include "heatsdf/training.hpp"

namespace heatsdf {

struct SdfConfig {
  double lambda_fit = 100.0;
  double lambda_B = 1.0;
  double delta = 0.005;
  bool use_far_field = true;
  // 0 evaluates the full cell sums every batch; otherwise per-batch random
  // subsample of this many centers per label, scaled by the count ratio.
  std::size_t region_subsample = 0;
};

// 2*delta <= h keeps the smoothed-indicator support of the region term away
// from the surface.
inline void validate_sdf_config(const SdfConfig& cfg, double mask_h) {
  if (!(cfg.lambda_fit > 0.0) || !(cfg.lambda_B > 0.0) || !(cfg.delta > 0.0))
    throw Error(ErrorKind::ConfigInvalid, "lambda_fit, lambda_B and delta must be positive");
  if (2.0 * cfg.delta > mask_h)
    throw Error(ErrorKind::ConfigInvalid,
                "constraint violated: 2*delta <= h (delta=" + std::to_string(cfg.delta) +
                    ", h=" + std::to_string(mask_h) + ")");
}

// Smoothed step: 1 for s <= -delta, 0 for s >= delta, C1 cubic Hermite
// profile eta(s) = 1/4 (s+2)(s-1)^2 on the transition.
inline double eta_delta(double s, double delta) {
  const double t = s / delta;
  if (t <= -1.0) return 1.0;
  if (t >= 1.0) return 0.0;
  return 0.25 * (t + 2.0) * (t - 1.0) * (t - 1.0);
}

inline double eta_delta_prime(double s, double delta) {
  const double t = s / delta;
  if (t <= -1.0 || t >= 1.0) return 0.0;
  return 0.75 * (t * t - 1.0) / delta;
}

// Smoothed two-branch alignment integrand:
//   eta_delta(phi) |g + n|^2 + (1 - eta_delta(phi)) |g - n|^2.
// Shared by the loss and its tests.
inline double normal_integrand(const FieldSample& s, const Vec3& n, double delta) {
  const double e = eta_delta(s.value, delta);
  return e * norm2(s.gradient + n) + (1.0 - e) * norm2(s.gradient - n);
}

// Provider of the alignment target at a sample point; returns false where
// the target is degenerate (that sample then contributes with n = 0).
using NormalTargetFn = std::function<bool(const Vec3&, Vec3&)>;

inline double normal_loss(const NeuralField& phi, const NormalTargetFn& target,
                          const VolumeBatch& vol, double delta, std::span<double> grad_accum,
                          double weight = 1.0) {
  const double sv = weight * vol.volume / static_cast<double>(vol.points.size());
  return batch_backprop(
      phi, vol.points,
      [&](std::size_t i, const FieldSample& s, double& va, Vec3& ga) {
        Vec3 n{0.0, 0.0, 0.0};
        target(vol.points[i], n);
        const double e = eta_delta(s.value, delta);
        const Vec3 plus = s.gradient + n;
        const Vec3 minus = s.gradient - n;
        va = sv * eta_delta_prime(s.value, delta) * (norm2(plus) - norm2(minus));
        ga = (2.0 * sv) * (e * plus + (1.0 - e) * minus);
        return sv * (e * norm2(plus) + (1.0 - e) * norm2(minus));
      },
      grad_accum);
}

// Weighted mean of phi^2 over the cloud batch.
inline double fit_loss(const NeuralField& phi, const SurfaceBatch& surf,
                       std::span<double> grad_accum, double weight = 1.0) {
  return batch_backprop_values(
      phi, surf.points,
      [&](std::size_t j, double v, double& va) {
        va = 2.0 * weight * surf.weights[j] * v;
        return weight * surf.weights[j] * v * v;
      },
      grad_accum);
}

// Orientation term via midpoint quadrature over the labeled cells:
//   h^3 sum_{B-} (1 - eta_delta(phi)) + h^3 sum_{B+} eta_delta(phi).
// inside_centers/outside_centers must come from cells_of(mask, ...). With
// subsample > 0, evaluates that many uniformly drawn centers per label and
// scales by the count ratio (unbiased).
inline double region_loss(const NeuralField& phi, std::span<const Vec3> inside_centers,
                          std::span<const Vec3> outside_centers, double h, double delta,
                          std::span<double> grad_accum, double weight = 1.0,
                          std::size_t subsample = 0, CounterRng* rng = nullptr) {
  const double h3 = h * h * h;
  double loss = 0.0;
  std::vector<Vec3> picked;
  for (int side = 0; side < 2; ++side) {
    const auto centers = side == 0 ? inside_centers : outside_centers;
    if (centers.empty()) continue;
    const double sign = side == 0 ? -1.0 : 1.0;  // d/dphi of (1 - eta) vs eta
    double scale = weight * h3;
    std::span<const Vec3> eval_pts = centers;
    if (subsample > 0 && subsample < centers.size()) {
      picked.resize(subsample);
      for (auto& p : picked) p = centers[rng->next_below(centers.size())];
      scale *= static_cast<double>(centers.size()) / static_cast<double>(subsample);
      eval_pts = picked;
    }
    loss += batch_backprop_values(
        phi, eval_pts,
        [&](std::size_t, double v, double& va) {
          va = sign * scale * eta_delta_prime(v, delta);
          return scale * (side == 0 ? 1.0 - eta_delta(v, delta) : eta_delta(v, delta));
        },
        grad_accum);
  }
  return loss;
}

struct SdfModel {
  NeuralField phi;
  std::string heat_ref;  // digest of the heat checkpoint this was built from
  SdfConfig config;
};

struct SdfSolveReport {
  std::vector<double> epoch_losses;
  double final_normal = 0.0;
  double final_fit = 0.0;
  double final_region = 0.0;
  bool region_vanished = false;
};

// Stage 2: minimize  E_n + lambda_fit E_fit + lambda_B E_B  with the
// alignment target taken from the frozen heat solution at every volume
// sample. phi starts from a fresh sine-net initialization.
inline SdfModel solve_sdf(const HeatSolution& heat, const RegionMask& mask, const PointCloud& pc,
                          const SdfConfig& config, const Architecture& arch,
                          const TrainSchedule& schedule, std::size_t volume_samples,
                          std::size_t surface_batch, std::uint64_t seed,
                          SdfSolveReport* report = nullptr, const EpochCallback& on_epoch = {}) {
  validate_sdf_config(config, mask.h);
  const std::vector<Vec3> inside = cells_of(mask, CellLabel::Inside);
  const std::vector<Vec3> outside = cells_of(mask, CellLabel::Outside);
  const std::size_t m = std::min(surface_batch, pc.size());

  HeatSolution heat_cfg = heat;
  heat_cfg.use_far_field = config.use_far_field;
  HeatSolutionEvaluator target_eval(heat_cfg);
  const NormalTargetFn target = [&target_eval](const Vec3& x, Vec3& n) {
    return target_eval.normal_target(x, n);
  };

  const BatchLossFn loss = [&](const NeuralField& f, std::uint64_t s, std::uint64_t step,
                               std::span<double> grad) {
    CounterRng vol_rng(s, step * 4 + 1);
    CounterRng surf_rng(s, step * 4 + 2);
    const VolumeBatch vol = sample_volume(vol_rng, volume_samples);
    const SurfaceBatch surf = sample_surface(pc, surf_rng, m);
    double v = normal_loss(f, target, vol, config.delta, grad);
    v += fit_loss(f, surf, grad, config.lambda_fit);
    CounterRng region_rng(s, step * 4 + 3);
    v += region_loss(f, inside, outside, mask.h, config.delta, grad, config.lambda_B,
                     config.region_subsample, &region_rng);
    return v;
  };

  TrainResult tr = train(init_siren(arch, seed + 1), loss, schedule, seed, on_epoch);

  SdfModel model;
  model.phi = std::move(tr.field);
  model.config = config;

  if (report) {
    report->epoch_losses = std::move(tr.epoch_losses);
    // final per-term values on a fresh evaluation batch, full region sums
    CounterRng vol_rng(seed, 0xEA11);
    CounterRng surf_rng(seed, 0xEA12);
    const VolumeBatch vol = sample_volume(vol_rng, volume_samples);
    const SurfaceBatch surf = sample_surface(pc, surf_rng, m);
    std::vector<double> sink(model.phi.params.size(), 0.0);
    report->final_normal = normal_loss(model.phi, target, vol, config.delta, sink);
    report->final_fit = fit_loss(model.phi, surf, sink);
    report->final_region = region_loss(model.phi, inside, outside, mask.h, config.delta, sink);
    report->region_vanished = report->final_region == 0.0;
  }
  return model;
}

}  // namespace heatsdf
