#pragma once

#include <cstdint>
#include <vector>

#include "heatsdf/core.hpp"
#include "heatsdf/neuralfield.hpp"
#include "heatsdf/pointcloud.hpp"
#include "heatsdf/sampling.hpp"
#include "heatsdf/training.hpp"

namespace heatsdf {

// Trained heat time steps: a small step for accurate near-field normals and
// a large one whose gradients stay usable far from the surface. kappa is the
// blending threshold on u_near values.
struct HeatSolution {
  NeuralField u_near;
  NeuralField u_far;
  double tau = 0.005;
  double tau_hat = 0.1;
  double kappa = 0.0;
  bool use_far_field = true;
};

// Modified minimizing-movement energy for one implicit heat step:
//   |Omega| * mean(u^2 + tau |grad u|^2)  -  2 * sum_j w_j u(x_j).
// Parameter gradients flow through both the values and the spatial
// gradients. Returns the batch value; gradients accumulate into grad_accum.
inline double heat_loss(const NeuralField& u, const VolumeBatch& vol, const SurfaceBatch& surf,
                        double tau, std::span<double> grad_accum) {
  if (vol.points.empty() || surf.points.empty())
    throw Error(ErrorKind::ConfigInvalid, "heat_loss needs nonempty batches");
  const double sv = vol.volume / static_cast<double>(vol.points.size());
  double loss = batch_backprop(
      u, vol.points,
      [&](std::size_t, const FieldSample& s, double& va, Vec3& ga) {
        va = 2.0 * sv * s.value;
        ga = (2.0 * sv * tau) * s.gradient;
        return sv * (s.value * s.value + tau * norm2(s.gradient));
      },
      grad_accum);
  loss += batch_backprop_values(
      u, surf.points,
      [&](std::size_t j, double v, double& va) {
        va = -2.0 * surf.weights[j];
        return -2.0 * surf.weights[j] * v;
      },
      grad_accum);
  return loss;
}

struct HeatStepResult {
  NeuralField field;
  std::vector<double> epoch_losses;
  double positive_fraction = 0.0;  // share of cloud points with u > 0 (diagnostic)
};

// Trains one heat time step from scratch. Per-batch sample streams are
// derived from (seed, step), so runs are reproducible.
inline HeatStepResult solve_heat_step(const PointCloud& pc, double tau, const Architecture& arch,
                                      const TrainSchedule& schedule, std::size_t volume_samples,
                                      std::size_t surface_batch, std::uint64_t seed,
                                      const EpochCallback& on_epoch = {}) {
  const std::size_t m = std::min(surface_batch, pc.size());
  const BatchLossFn loss = [&pc, tau, volume_samples, m](const NeuralField& f, std::uint64_t s,
                                                         std::uint64_t step, std::span<double> grad) {
    CounterRng vol_rng(s, step * 4 + 1);
    CounterRng surf_rng(s, step * 4 + 2);
    const VolumeBatch vol = sample_volume(vol_rng, volume_samples);
    const SurfaceBatch surf = sample_surface(pc, surf_rng, m);
    return heat_loss(f, vol, surf, tau, grad);
  };

  TrainResult tr = train(init_siren(arch, seed), loss, schedule, seed, on_epoch);

  HeatStepResult result;
  result.epoch_losses = std::move(tr.epoch_losses);
  result.field = std::move(tr.field);
  FieldEvaluator ev(result.field);
  std::size_t positive = 0;
  for (const Vec3& p : pc.points)
    if (ev.value(p) > 0.0) ++positive;
  result.positive_fraction = static_cast<double>(positive) / static_cast<double>(pc.size());
  return result;
}

// kappa = 0.6 * max |u_near| over the orientation grid cell centers.
inline double compute_kappa(const NeuralField& u_near, std::span<const Vec3> cell_centers) {
  if (cell_centers.empty()) throw Error(ErrorKind::ConfigInvalid, "compute_kappa needs a nonempty grid");
  FieldEvaluator ev(u_near);
  double max_abs = 0.0;
  for (const Vec3& c : cell_centers) max_abs = std::max(max_abs, std::abs(ev.value(c)));
  return 0.6 * max_abs;
}

// C1 cubic Hermite blend profile: 1 for s <= 0, 0 for s >= 1,
// 1/4 (2s+1)(2s-2)^2 in between. Negative u_near values clamp to the pure
// far-field branch.
inline double blend_mu(double s) {
  if (s <= 0.0) return 1.0;
  if (s >= 1.0) return 0.0;
  const double t = 2.0 * s - 2.0;
  return 0.25 * (2.0 * s + 1.0) * t * t;
}

// Reusable evaluator for the blended normal field and the target consumed by
// the SDF stage. Exactly one sign flip happens here, in normal_target: the
// raw blended gradient points toward the surface, while the target must
// match grad(phi) outside (pointing away from the surface).
class HeatSolutionEvaluator {
 public:
  explicit HeatSolutionEvaluator(const HeatSolution& heat)
      : heat_(&heat), near_(heat.u_near), far_(heat.u_far) {}

  // Raw blend: normalize((1-beta) grad u_near + beta grad u_far) with
  // beta = mu(u_near/kappa). Returns false if the blend is degenerate.
  bool blended_direction(const Vec3& x, Vec3& out) {
    Vec3 v;
    if (heat_->use_far_field) {
      const FieldSample sn = near_.value_and_gradient(x);
      const FieldSample sf = far_.value_and_gradient(x);
      const double beta = blend_mu(sn.value / heat_->kappa);
      v = (1.0 - beta) * sn.gradient + beta * sf.gradient;
    } else {
      v = near_.value_and_gradient(x).gradient;
    }
    const double len = norm(v);
    if (len < 1e-12) return false;
    out = v / len;
    return true;
  }

  bool normal_target(const Vec3& x, Vec3& out) {
    if (!blended_direction(x, out)) return false;
    out = -out;
    return true;
  }

 private:
  const HeatSolution* heat_;
  FieldEvaluator near_, far_;
};

inline Vec3 blended_normal(const HeatSolution& heat, const Vec3& x) {
  HeatSolutionEvaluator ev(heat);
  Vec3 n;
  if (!ev.blended_direction(x, n))
    throw Error(ErrorKind::DegenerateNormal, "blended gradient norm below 1e-12");
  return n;
}

}  // namespace heatsdf
