#include <catch2/catch_amalgamated.hpp>

#include "heatsdf/heatstage.hpp"
#include "support/testutil.hpp"

using namespace heatsdf;

namespace {
PointCloud tiny_cloud(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  PointCloud pc;
  pc.points.resize(n);
  for (auto& p : pc.points) p = rng.next_in_domain() * 0.7;
  pc.weights.assign(n, 1.0 / static_cast<double>(n));
  return pc;
}
}  // namespace

TEST_CASE("heat loss vanishes for the zero field") {
  const NeuralField u = constant_field({3, 4, 1, 30.0}, 0.0);
  CounterRng rng(1);
  const VolumeBatch vol = sample_volume(rng, 50);
  const SurfaceBatch surf = sample_surface(tiny_cloud(20, 2), rng, 10);
  std::vector<double> grad(u.params.size(), 0.0);
  CHECK(heat_loss(u, vol, surf, 0.005, grad) == 0.0);
}

TEST_CASE("heat loss of a constant field is |Omega| c^2 - 2c") {
  const double c = 0.3;
  const NeuralField u = constant_field({3, 4, 1, 30.0}, c);
  CounterRng rng(3);
  const VolumeBatch vol = sample_volume(rng, 200);
  const SurfaceBatch surf = sample_surface(tiny_cloud(30, 4), rng, 30);
  std::vector<double> grad(u.params.size(), 0.0);
  const double loss = heat_loss(u, vol, surf, 0.005, grad);
  CHECK(loss == Catch::Approx(domain_volume * c * c - 2.0 * c).margin(1e-12));
}

TEST_CASE("restricted to constants, the loss is minimized at 1/|Omega|") {
  CounterRng rng(5);
  const VolumeBatch vol = sample_volume(rng, 100);
  const SurfaceBatch surf = sample_surface(tiny_cloud(25, 6), rng, 25);
  const Architecture arch{3, 2, 1, 30.0};
  const auto loss_at = [&](double c) {
    const NeuralField u = constant_field(arch, c);
    std::vector<double> grad(u.params.size(), 0.0);
    return heat_loss(u, vol, surf, 0.005, grad);
  };
  // quadratic in c: recover the vertex from three evaluations
  const double l0 = loss_at(0.0), l1 = loss_at(1.0), lm = loss_at(-1.0);
  const double a = 0.5 * (l1 + lm) - l0;
  const double b = 0.5 * (l1 - lm);
  const double cstar = -b / (2.0 * a);
  CHECK(cstar == Catch::Approx(1.0 / domain_volume).epsilon(1e-10));
  CHECK(loss_at(cstar) == Catch::Approx(-1.0 / domain_volume).epsilon(1e-10));
}

TEST_CASE("heat loss parameter gradient matches finite differences") {
  CounterRng rng(7);
  const PointCloud pc = tiny_cloud(16, 8);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const NeuralField u = testutil::random_small_net(rng, 6, 2);
    CounterRng brng(100 + trial);
    const VolumeBatch vol = sample_volume(brng, 16);
    const SurfaceBatch surf = sample_surface(pc, brng, 8);
    std::vector<double> grad(u.params.size(), 0.0);
    heat_loss(u, vol, surf, 0.01, grad);
    const auto fd = testutil::fd_parameter_gradient(u, [&](const NeuralField& g) {
      std::vector<double> sink(g.params.size(), 0.0);
      return heat_loss(g, vol, surf, 0.01, sink);
    });
    worst = std::max(worst, testutil::array_rel_err(grad, fd));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("blend profile endpoints and C1 joins") {
  CHECK(blend_mu(0.0) == 1.0);
  CHECK(blend_mu(1.0) == 0.0);
  CHECK(blend_mu(0.5) == Catch::Approx(0.5).margin(1e-15));
  CHECK(blend_mu(-3.0) == 1.0);
  CHECK(blend_mu(7.0) == 0.0);
  // numerical C1 at the joins
  const double h = 1e-7;
  for (double s0 : {0.0, 1.0}) {
    const double left = (blend_mu(s0) - blend_mu(s0 - h)) / h;
    const double right = (blend_mu(s0 + h) - blend_mu(s0)) / h;
    CHECK(std::abs(left - right) < 1e-6);
    CHECK(std::abs(left) < 1e-6);
  }
}

TEST_CASE("kappa is 0.6 times the max |u| over cell centers") {
  const NeuralField u = constant_field({3, 4, 1, 30.0}, 0.1);
  const std::vector<Vec3> centers = {{0, 0, 0}, {0.5, 0, 0}};
  CHECK(compute_kappa(u, centers) == Catch::Approx(0.06).margin(1e-15));

  const std::vector<Vec3> one = {{0.25, 0.25, 0.25}};
  CounterRng rng(9);
  const NeuralField w = testutil::random_small_net(rng);
  CHECK(compute_kappa(w, one) == Catch::Approx(0.6 * std::abs(eval(w, one[0]))));
}

TEST_CASE("blended normal follows the mu-weighted formula and is unit length") {
  CounterRng rng(11);
  HeatSolution heat;
  heat.u_near = testutil::random_small_net(rng);
  heat.u_far = testutil::random_small_net(rng);
  heat.kappa = 0.2;

  HeatSolutionEvaluator ev(heat);
  for (int i = 0; i < 50; ++i) {
    const Vec3 x = rng.next_in_domain();
    const FieldSample sn = eval_with_gradient(heat.u_near, x);
    const FieldSample sf = eval_with_gradient(heat.u_far, x);
    const double beta = blend_mu(sn.value / heat.kappa);
    const Vec3 expect = (1.0 - beta) * sn.gradient + beta * sf.gradient;
    if (norm(expect) < 1e-12) continue;
    Vec3 got;
    REQUIRE(ev.blended_direction(x, got));
    CHECK(norm(got) == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(testutil::vec_rel_err(got, normalized(expect)) < 1e-12);
    Vec3 target;
    REQUIRE(ev.normal_target(x, target));
    CHECK(norm(target + got) == Catch::Approx(0.0).margin(1e-15));
  }
}

TEST_CASE("blend endpoints select the pure fields") {
  CounterRng rng(13);
  HeatSolution heat;
  heat.u_near = testutil::random_small_net(rng);
  heat.u_far = testutil::random_small_net(rng);
  HeatSolutionEvaluator* ev = nullptr;

  // find sample points with positive and negative near-field values
  Vec3 xpos{}, xneg{};
  bool has_pos = false, has_neg = false;
  for (int i = 0; i < 2000 && !(has_pos && has_neg); ++i) {
    const Vec3 x = rng.next_in_domain();
    const double v = eval(heat.u_near, x);
    if (v > 1e-3 && !has_pos) {
      xpos = x;
      has_pos = true;
    }
    if (v < -1e-3 && !has_neg) {
      xneg = x;
      has_neg = true;
    }
  }
  REQUIRE(has_pos);
  REQUIRE(has_neg);

  // kappa below the positive value: pure near field there
  heat.kappa = 0.5 * eval(heat.u_near, xpos);
  HeatSolutionEvaluator ev1(heat);
  Vec3 n;
  REQUIRE(ev1.blended_direction(xpos, n));
  CHECK(testutil::vec_rel_err(n, normalized(eval_with_gradient(heat.u_near, xpos).gradient)) < 1e-12);

  // negative near value: pure far field regardless of kappa
  REQUIRE(ev1.blended_direction(xneg, n));
  CHECK(testutil::vec_rel_err(n, normalized(eval_with_gradient(heat.u_far, xneg).gradient)) < 1e-12);
  (void)ev;
}

TEST_CASE("near-field-only mode ignores the far field") {
  CounterRng rng(15);
  HeatSolution heat;
  heat.u_near = testutil::random_small_net(rng);
  heat.u_far = testutil::random_small_net(rng);
  heat.kappa = 1e-6;  // would blend heavily if far field were active
  heat.use_far_field = false;
  HeatSolutionEvaluator ev(heat);
  const Vec3 x{0.2, -0.4, 0.1};
  Vec3 n;
  REQUIRE(ev.blended_direction(x, n));
  CHECK(testutil::vec_rel_err(n, normalized(eval_with_gradient(heat.u_near, x).gradient)) < 1e-12);
}

TEST_CASE("degenerate blends are reported") {
  HeatSolution heat;
  heat.u_near = constant_field({3, 4, 1, 30.0}, 0.5);
  heat.u_far = constant_field({3, 4, 1, 30.0}, -0.2);
  heat.kappa = 0.1;
  try {
    blended_normal(heat, {0, 0, 0});
    FAIL("expected DegenerateNormal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateNormal);
  }
}

TEST_CASE("a short heat run decreases the loss and reports diagnostics") {
  const PointCloud pc = tiny_cloud(200, 17);
  TrainSchedule sched;
  sched.epochs = 2;
  sched.batches_per_epoch = 40;
  sched.initial_lr = 1e-3;
  const HeatStepResult r =
      solve_heat_step(pc, 0.01, {3, 16, 1, 30.0}, sched, 200, 100, 23);
  REQUIRE(r.epoch_losses.size() == 2);
  CHECK(r.epoch_losses.back() < r.epoch_losses.front());
  CHECK(r.positive_fraction >= 0.0);
  CHECK(r.positive_fraction <= 1.0);
}
