#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "heatsdf/core.hpp"
#include "heatsdf/rng.hpp"

namespace heatsdf {

// Fully connected scalar field with sine activations. The first layer applies
// a frequency scale omega0 to its pre-activation; deeper layers use plain
// sine. The output layer is linear.
struct Architecture {
  int input_dim = 3;
  int hidden_dim = 256;
  int hidden_layers = 4;
  double omega0 = 30.0;

  bool operator==(const Architecture& o) const {
    return input_dim == o.input_dim && hidden_dim == o.hidden_dim &&
           hidden_layers == o.hidden_layers && omega0 == o.omega0;
  }
};

// Flat parameter layout, layer-major:
//   W1 [hidden][input] row-major, b1 [hidden],
//   Wl [hidden][hidden], bl [hidden]        for l = 2..hidden_layers,
//   Wout [hidden], bout.
// Adam state, checkpoints and finite-difference checks all index this layout.
inline std::size_t parameter_count(const Architecture& a) {
  const std::size_t h = static_cast<std::size_t>(a.hidden_dim);
  return h * (a.input_dim + 1) + static_cast<std::size_t>(a.hidden_layers - 1) * h * (h + 1) +
         (h + 1);
}

struct NeuralField {
  Architecture arch;
  std::vector<double> params;
  std::uint64_t seed = 0;
};

struct FieldSample {
  double value = 0.0;
  Vec3 gradient{0.0, 0.0, 0.0};
};

// Deterministic initialization: first-layer weights uniform in
// [-1/d_in, 1/d_in], deeper and output weights uniform in
// [-sqrt(6/d)/omega0, sqrt(6/d)/omega0] with d the fan-in, biases zero.
// Draws are consumed in flat-layout order, so a fixed seed gives
// bit-identical parameters.
inline NeuralField init_siren(const Architecture& arch, std::uint64_t seed) {
  NeuralField f;
  f.arch = arch;
  f.seed = seed;
  f.params.assign(parameter_count(arch), 0.0);
  CounterRng rng(seed, /*stream=*/0x5157);

  const int h = arch.hidden_dim;
  std::size_t off = 0;
  const double first_bound = 1.0 / arch.input_dim;
  for (int i = 0; i < h * arch.input_dim; ++i) f.params[off++] = rng.uniform(-first_bound, first_bound);
  off += h;  // b1 = 0
  const double deep_bound = std::sqrt(6.0 / h) / arch.omega0;
  for (int l = 1; l < arch.hidden_layers; ++l) {
    for (int i = 0; i < h * h; ++i) f.params[off++] = rng.uniform(-deep_bound, deep_bound);
    off += h;  // bl = 0
  }
  for (int i = 0; i < h; ++i) f.params[off++] = rng.uniform(-deep_bound, deep_bound);
  off += 1;  // bout = 0
  return f;
}

namespace detail {

// Dot product with four independent accumulators; keeps the order fixed
// (deterministic) while letting the compiler vectorize.
inline double dot_n(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return ((s0 + s1) + (s2 + s3));
}

struct LayerOffsets {
  std::size_t w = 0;
  std::size_t b = 0;
};

// Scratch buffers for one forward/backward pass. Reused across samples;
// ensure() is cheap when the architecture is unchanged.
struct Workspace {
  Architecture arch;
  int layers = 0;
  std::vector<LayerOffsets> off;
  std::size_t out_w = 0, out_b = 0;

  // forward state per layer: pre-activation z, activation a, pre-activation
  // Jacobian p[3] and activation Jacobian j[3] (columns d/dx, d/dy, d/dz)
  std::vector<std::vector<double>> z, a;
  std::vector<std::vector<double>> px, py, pz, jx, jy, jz;
  // backward state
  std::vector<double> zbar, abar, abar2, pbx, pby, pbz, jbx, jby, jbz, jbx2, jby2, jbz2;

  void ensure(const Architecture& ar) {
    if (layers == ar.hidden_layers && arch == ar) return;
    arch = ar;
    layers = ar.hidden_layers;
    const std::size_t h = static_cast<std::size_t>(ar.hidden_dim);
    off.resize(layers);
    std::size_t o = 0;
    for (int l = 0; l < layers; ++l) {
      const std::size_t fan_in = (l == 0) ? static_cast<std::size_t>(ar.input_dim) : h;
      off[l].w = o;
      o += h * fan_in;
      off[l].b = o;
      o += h;
    }
    out_w = o;
    out_b = o + h;
    auto sized = [&](std::vector<std::vector<double>>& v) {
      v.resize(layers);
      for (auto& e : v) e.resize(h);
    };
    sized(z); sized(a);
    sized(px); sized(py); sized(pz);
    sized(jx); sized(jy); sized(jz);
    for (auto* v : {&zbar, &abar, &abar2, &pbx, &pby, &pbz, &jbx, &jby, &jbz, &jbx2, &jby2, &jbz2})
      v->resize(h);
  }
};

// Forward pass. With `spatial` set, also propagates the exact Jacobian of
// each activation with respect to x (chain rule through the cosines), giving
// the analytic spatial gradient of the output.
inline FieldSample forward(const NeuralField& f, const Vec3& x, Workspace& ws, bool spatial) {
  ws.ensure(f.arch);
  const int h = f.arch.hidden_dim;
  const double* prm = f.params.data();
  const double w0 = f.arch.omega0;

  {  // first layer: z = omega0 * (W1 x) + b1
    const double* W = prm + ws.off[0].w;
    const double* b = prm + ws.off[0].b;
    for (int i = 0; i < h; ++i) {
      const double* r = W + 3 * i;
      const double zi = w0 * (r[0] * x.x + r[1] * x.y + r[2] * x.z) + b[i];
      ws.z[0][i] = zi;
      ws.a[0][i] = std::sin(zi);
      if (spatial) {
        const double c = std::cos(zi);
        ws.px[0][i] = w0 * r[0];
        ws.py[0][i] = w0 * r[1];
        ws.pz[0][i] = w0 * r[2];
        ws.jx[0][i] = c * ws.px[0][i];
        ws.jy[0][i] = c * ws.py[0][i];
        ws.jz[0][i] = c * ws.pz[0][i];
      }
    }
  }
  for (int l = 1; l < ws.layers; ++l) {
    const double* W = prm + ws.off[l].w;
    const double* b = prm + ws.off[l].b;
    const double* ap = ws.a[l - 1].data();
    for (int i = 0; i < h; ++i) {
      const double* r = W + static_cast<std::size_t>(h) * i;
      const double zi = dot_n(r, ap, h) + b[i];
      ws.z[l][i] = zi;
      ws.a[l][i] = std::sin(zi);
      if (spatial) {
        const double c = std::cos(zi);
        const double piX = dot_n(r, ws.jx[l - 1].data(), h);
        const double piY = dot_n(r, ws.jy[l - 1].data(), h);
        const double piZ = dot_n(r, ws.jz[l - 1].data(), h);
        ws.px[l][i] = piX;
        ws.py[l][i] = piY;
        ws.pz[l][i] = piZ;
        ws.jx[l][i] = c * piX;
        ws.jy[l][i] = c * piY;
        ws.jz[l][i] = c * piZ;
      }
    }
  }
  const double* wo = prm + ws.out_w;
  const int L = ws.layers - 1;
  FieldSample s;
  s.value = dot_n(wo, ws.a[L].data(), h) + prm[ws.out_b];
  if (spatial) {
    s.gradient = {dot_n(wo, ws.jx[L].data(), h), dot_n(wo, ws.jy[L].data(), h),
                  dot_n(wo, ws.jz[L].data(), h)};
  }
  return s;
}

// Reverse pass through the (value, spatial gradient) computation for one
// sample: accumulates d/dtheta of (va * value + ga . gradient) into grad.
// Requires the matching forward(..., spatial=true) state in ws.
inline void backward(const NeuralField& f, const Vec3& x, Workspace& ws, double va, const Vec3& ga,
                     std::span<double> grad, bool spatial) {
  const int h = f.arch.hidden_dim;
  const double* prm = f.params.data();
  double* g = grad.data();
  const int L = ws.layers - 1;

  {  // output layer
    const double* wo = prm + ws.out_w;
    double* gw = g + ws.out_w;
    const double* aL = ws.a[L].data();
    if (spatial) {
      const double* jX = ws.jx[L].data();
      const double* jY = ws.jy[L].data();
      const double* jZ = ws.jz[L].data();
      for (int i = 0; i < h; ++i) {
        gw[i] += va * aL[i] + ga.x * jX[i] + ga.y * jY[i] + ga.z * jZ[i];
        ws.abar[i] = va * wo[i];
        ws.jbx[i] = wo[i] * ga.x;
        ws.jby[i] = wo[i] * ga.y;
        ws.jbz[i] = wo[i] * ga.z;
      }
    } else {
      for (int i = 0; i < h; ++i) {
        gw[i] += va * aL[i];
        ws.abar[i] = va * wo[i];
      }
    }
    g[ws.out_b] += va;
  }

  for (int l = L; l >= 0; --l) {
    const double* W = prm + ws.off[l].w;
    double* gw = g + ws.off[l].w;
    double* gb = g + ws.off[l].b;
    // z adjoint; the Jacobian path contributes through d(cos z)/dz = -sin z
    for (int i = 0; i < h; ++i) {
      const double c = std::cos(ws.z[l][i]);
      double zb = ws.abar[i] * c;
      if (spatial) {
        zb -= ws.a[l][i] *
              (ws.jbx[i] * ws.px[l][i] + ws.jby[i] * ws.py[l][i] + ws.jbz[i] * ws.pz[l][i]);
        ws.pbx[i] = c * ws.jbx[i];
        ws.pby[i] = c * ws.jby[i];
        ws.pbz[i] = c * ws.jbz[i];
      }
      ws.zbar[i] = zb;
      gb[i] += zb;
    }
    if (l == 0) {
      const double w0 = f.arch.omega0;
      for (int i = 0; i < h; ++i) {
        double* r = gw + 3 * i;
        const double zb = ws.zbar[i];
        r[0] += w0 * zb * x.x;
        r[1] += w0 * zb * x.y;
        r[2] += w0 * zb * x.z;
        if (spatial) {
          r[0] += w0 * ws.pbx[i];
          r[1] += w0 * ws.pby[i];
          r[2] += w0 * ws.pbz[i];
        }
      }
      break;
    }
    const double* ap = ws.a[l - 1].data();
    double* ab2 = ws.abar2.data();
    double* jb2x = ws.jbx2.data();
    double* jb2y = ws.jby2.data();
    double* jb2z = ws.jbz2.data();
    for (int j = 0; j < h; ++j) {
      ab2[j] = 0.0;
      if (spatial) jb2x[j] = jb2y[j] = jb2z[j] = 0.0;
    }
    if (spatial) {
      const double* jpx = ws.jx[l - 1].data();
      const double* jpy = ws.jy[l - 1].data();
      const double* jpz = ws.jz[l - 1].data();
      for (int i = 0; i < h; ++i) {
        const double* r = W + static_cast<std::size_t>(h) * i;
        double* gr = gw + static_cast<std::size_t>(h) * i;
        const double zb = ws.zbar[i];
        const double pbxi = ws.pbx[i], pbyi = ws.pby[i], pbzi = ws.pbz[i];
        for (int j = 0; j < h; ++j) {
          gr[j] += zb * ap[j] + pbxi * jpx[j] + pbyi * jpy[j] + pbzi * jpz[j];
          ab2[j] += r[j] * zb;
          jb2x[j] += r[j] * pbxi;
          jb2y[j] += r[j] * pbyi;
          jb2z[j] += r[j] * pbzi;
        }
      }
    } else {
      for (int i = 0; i < h; ++i) {
        const double* r = W + static_cast<std::size_t>(h) * i;
        double* gr = gw + static_cast<std::size_t>(h) * i;
        const double zb = ws.zbar[i];
        for (int j = 0; j < h; ++j) {
          gr[j] += zb * ap[j];
          ab2[j] += r[j] * zb;
        }
      }
    }
    ws.abar.swap(ws.abar2);
    if (spatial) {
      ws.jbx.swap(ws.jbx2);
      ws.jby.swap(ws.jby2);
      ws.jbz.swap(ws.jbz2);
    }
  }
}

}  // namespace detail

// Repeated evaluation with a reused workspace.
class FieldEvaluator {
 public:
  explicit FieldEvaluator(const NeuralField& f) : field_(&f) {}
  double value(const Vec3& x) { return detail::forward(*field_, x, ws_, false).value; }
  FieldSample value_and_gradient(const Vec3& x) { return detail::forward(*field_, x, ws_, true); }

 private:
  const NeuralField* field_;
  detail::Workspace ws_;
};

inline double eval(const NeuralField& f, const Vec3& x) {
  detail::Workspace ws;
  return detail::forward(f, x, ws, false).value;
}

inline FieldSample eval_with_gradient(const NeuralField& f, const Vec3& x) {
  detail::Workspace ws;
  return detail::forward(f, x, ws, true);
}

inline std::vector<FieldSample> eval_batch(const NeuralField& f, std::span<const Vec3> pts,
                                           bool with_gradient = true) {
  detail::Workspace ws;
  std::vector<FieldSample> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) out[i] = detail::forward(f, pts[i], ws, with_gradient);
  return out;
}

struct AdjointSample {
  Vec3 x;
  double value_adjoint = 0.0;
  Vec3 gradient_adjoint{0.0, 0.0, 0.0};
};

// Gradient of L = sum_i (a_i * value(x_i) + b_i . grad(x_i)) with respect to
// the parameters. Exact to the order of the forward computation; the
// gradient-adjoint path carries the second-order terms needed by losses that
// are quadratic in the spatial gradient.
inline std::vector<double> backprop_parameter_gradients(const NeuralField& f,
                                                        std::span<const AdjointSample> samples) {
  std::vector<double> grad(f.params.size(), 0.0);
  detail::Workspace ws;
  for (const auto& s : samples) {
    detail::forward(f, s.x, ws, true);
    detail::backward(f, s.x, ws, s.value_adjoint, s.gradient_adjoint, grad, true);
  }
  return grad;
}

// Fused per-sample evaluate/adjoint/accumulate drivers used by the losses.
// fn sees the sample index and its FieldSample and returns the loss
// contribution after writing the adjoints. Samples are processed in index
// order; accumulation order is fixed.
template <class Fn>
double batch_backprop(const NeuralField& f, std::span<const Vec3> pts, Fn&& fn,
                      std::span<double> grad_accum) {
  detail::Workspace ws;
  double loss = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const FieldSample s = detail::forward(f, pts[i], ws, true);
    double va = 0.0;
    Vec3 ga{0.0, 0.0, 0.0};
    loss += fn(i, s, va, ga);
    detail::backward(f, pts[i], ws, va, ga, grad_accum, true);
  }
  return loss;
}

// Value-only variant (no spatial Jacobians); considerably cheaper.
template <class Fn>
double batch_backprop_values(const NeuralField& f, std::span<const Vec3> pts, Fn&& fn,
                             std::span<double> grad_accum) {
  detail::Workspace ws;
  double loss = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const FieldSample s = detail::forward(f, pts[i], ws, false);
    double va = 0.0;
    loss += fn(i, s.value, va);
    detail::backward(f, pts[i], ws, va, Vec3{}, grad_accum, false);
  }
  return loss;
}

// Constant field c: zero weights, output bias c. Handy for fixed-point tests.
inline NeuralField constant_field(const Architecture& arch, double c) {
  NeuralField f;
  f.arch = arch;
  f.params.assign(parameter_count(arch), 0.0);
  f.params.back() = c;
  return f;
}

}  // namespace heatsdf
