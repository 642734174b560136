#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "heatsdf/core.hpp"
#include "heatsdf/pointcloud.hpp"
#include "heatsdf/rng.hpp"

namespace heatsdf {

// Uniform quadrature points over the domain. The Monte-Carlo estimator for
// an integral of f is domain_volume * mean(f(points)); the volume factor is
// carried explicitly so loss weights refer to true integrals.
struct VolumeBatch {
  std::vector<Vec3> points;
  double volume = domain_volume;
};

// Subsample of cloud points with renormalized quadrature weights.
struct SurfaceBatch {
  std::vector<Vec3> points;
  std::vector<double> weights;  // non-negative, sum to 1
};

inline VolumeBatch sample_volume(CounterRng& rng, std::size_t n) {
  VolumeBatch b;
  b.points.resize(n);
  for (auto& p : b.points) p = rng.next_in_domain();
  return b;
}

// Systematic probability-proportional-to-size sampling: a single uniform
// offset u in [0, 1/m) selects the indices whose cumulative weight crosses
// u + k/m. Inclusion probability of point i is exactly m * w_i (for
// m * w_i <= 1), so the uniform 1/m batch weights make
// sum_j (1/m) u(x_j) an unbiased estimator of sum_i w_i u(x_i).
// Points with m * w_i > 1 can be selected with multiplicity, which keeps the
// estimator unbiased.
inline SurfaceBatch sample_surface(const PointCloud& pc, CounterRng& rng, std::size_t m) {
  const std::size_t n = pc.size();
  if (m < 1 || m > n) throw Error(ErrorKind::ConfigInvalid, "surface batch size out of range");
  SurfaceBatch b;
  b.points.reserve(m);
  b.weights.assign(m, 1.0 / static_cast<double>(m));

  const double step = 1.0 / static_cast<double>(m);
  double threshold = rng.next_open() * step;
  double cum = 0.0;
  for (std::size_t i = 0; i < n && b.points.size() < m; ++i) {
    cum += pc.weights[i];
    while (threshold < cum && b.points.size() < m) {
      b.points.push_back(pc.points[i]);
      threshold += step;
    }
  }
  // fp guard: cumulative sums can fall a hair short of 1
  while (b.points.size() < m) b.points.push_back(pc.points[n - 1]);
  return b;
}

// Uniform points in the band { |d(x)| <= band } by rejection from the
// uniform distribution on the domain.
inline std::vector<Vec3> sample_narrow_band(const std::function<double(const Vec3&)>& distance,
                                            double band, std::size_t n, CounterRng& rng) {
  std::vector<Vec3> pts;
  pts.reserve(n);
  std::uint64_t trials = 0;
  constexpr std::uint64_t max_trials = 10000000;
  while (pts.size() < n) {
    ++trials;
    const Vec3 p = rng.next_in_domain();
    if (std::abs(distance(p)) <= band) pts.push_back(p);
    if (trials >= max_trials &&
        static_cast<double>(pts.size()) < 1e-5 * static_cast<double>(trials))
      throw Error(ErrorKind::RejectionStall,
                  "narrow-band rejection sampling stalled: acceptance rate below 1e-5");
  }
  return pts;
}

}  // namespace heatsdf
