#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "heatsdf/neuralfield.hpp"
#include "heatsdf/rng.hpp"

namespace testutil {

using heatsdf::NeuralField;
using heatsdf::Vec3;

inline double rel_err(double a, double b, double floor = 1e-10) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double vec_rel_err(const Vec3& a, const Vec3& b, double floor = 1e-8) {
  return heatsdf::norm(a - b) / std::max({heatsdf::norm(a), heatsdf::norm(b), floor});
}

inline double array_rel_err(const std::vector<double>& a, const std::vector<double>& b,
                            double floor = 1e-8) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    na = std::max(na, std::abs(a[i]));
    nb = std::max(nb, std::abs(b[i]));
  }
  return diff / std::max({na, nb, floor});
}

// Central finite differences of a scalar loss over the parameter vector.
inline std::vector<double> fd_parameter_gradient(const NeuralField& field,
                                                 const std::function<double(const NeuralField&)>& loss,
                                                 double step = 1e-5) {
  std::vector<double> grad(field.params.size());
  NeuralField probe = field;
  for (std::size_t i = 0; i < field.params.size(); ++i) {
    const double orig = field.params[i];
    probe.params[i] = orig + step;
    const double up = loss(probe);
    probe.params[i] = orig - step;
    const double down = loss(probe);
    probe.params[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

inline Vec3 fd_spatial_gradient(const std::function<double(const Vec3&)>& f, const Vec3& x,
                                double step = 1e-4) {
  Vec3 g;
  for (int d = 0; d < 3; ++d) {
    Vec3 up = x, down = x;
    up[d] += step;
    down[d] -= step;
    g[d] = (f(up) - f(down)) / (2.0 * step);
  }
  return g;
}

// Small net with nonzero biases and O(1) weights, for derivative checks.
inline NeuralField random_small_net(heatsdf::CounterRng& rng, int hidden = 8, int layers = 2,
                                    double omega0 = 2.0) {
  NeuralField f;
  f.arch = {3, hidden, layers, omega0};
  f.params.resize(heatsdf::parameter_count(f.arch));
  for (auto& p : f.params) p = rng.uniform(-0.6, 0.6);
  return f;
}

}  // namespace testutil
