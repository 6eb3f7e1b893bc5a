#include <cmath>
#include <vector>

#include "doctest.h"
#include "phasewalk/manifold.hpp"
#include "phasewalk/scenario.hpp"

using namespace phasewalk;

namespace {

const RobotParams kRobot{1.0, 9.81};

}  // namespace

TEST_CASE("sigma vanishes at the apex point") {
  const auto p = ManifoldParams::apex(1.2, 0.6, 3.132);
  CHECK(sigma(1.2, 0.6, p) == 0.0);
  CHECK(sigmaApex(1.2, 0.6, 0.6, 1.2, 3.132) == 0.0);
}

TEST_CASE("sigma at a stalled state below the apex") {
  const double expected = -std::pow(0.6, 4) / (3.132 * 3.132);
  CHECK(expected == doctest::Approx(-0.013212).epsilon(1e-4));
  CHECK(sigmaApex(1.2, 0.0, 0.6, 1.2, 3.132) ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("general anchor form reduces to the apex form") {
  SplitMix64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const double xf = rng.uniform(-1, 1);
    const double apex = rng.uniform(0.1, 1.2);
    const double w = rng.uniform(2.5, 3.5);
    const auto p = ManifoldParams::apex(xf, apex, w);
    const double x = xf + rng.uniform(-0.5, 0.5);
    const double xd = rng.uniform(-1.5, 1.5);
    CHECK(sigma(x, xd, p) ==
          doctest::Approx(sigmaApex(x, xd, apex, xf, w)).epsilon(1e-12));
  }
}

TEST_CASE("sigma is a first integral of the analytic flow") {
  const double w = 3.132;
  const double xf = 1.0;
  const double apex = 0.8;
  const auto p = ManifoldParams::apex(xf, apex, w);
  for (double t = -0.4; t <= 0.4; t += 0.01) {
    const auto [x, xd] = analyticFlow(xf, apex, xf, w, t);
    CHECK(std::abs(sigma(x, xd, p)) < 1e-9);
  }
}

TEST_CASE("sigma general form is a first integral from any anchor") {
  SplitMix64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const double xf = rng.uniform(-1, 1);
    const double w = rng.uniform(2.8, 3.4);
    const double x0 = xf + rng.uniform(-0.4, 0.4);
    const double v0 = rng.uniform(0.2, 1.2);
    const ManifoldParams p{x0, v0, xf, w};
    for (double t = -0.2; t <= 0.2; t += 0.05) {
      const auto [x, xd] = analyticFlow(x0, v0, xf, w, t);
      CHECK(std::abs(sigma(x, xd, p)) < 1e-8);
    }
  }
}

TEST_CASE("zeta equals its scale at the anchor") {
  const ManifoldParams p{0.9, 0.5, 1.2, 3.1};
  CHECK(zeta(0.9, 0.5, p, 0.37) == doctest::Approx(0.37).epsilon(1e-15));
}

TEST_CASE("zeta domain errors in the saddle-adjacent region") {
  const ManifoldParams p{0.9, 0.5, 1.2, 3.1};
  CHECK_THROWS_AS(zeta(1.0, 0.0, p, 1.0), DomainError);
  CHECK_THROWS_AS(zeta(1.0, -0.2, p, 1.0), DomainError);
  CHECK_THROWS_AS(zeta(1.2, 0.5, p, 1.0), DomainError);
  const ManifoldParams saddle_anchor{1.2, 0.5, 1.2, 3.1};
  CHECK_THROWS_AS(zeta(1.0, 0.5, saddle_anchor, 1.0), DomainError);
}

TEST_CASE("sigma and zeta gradients are orthogonal") {
  SplitMix64 rng(17);
  const double h = 1e-6;
  int checked = 0;
  while (checked < 100) {
    const double xf = rng.uniform(-0.5, 0.5);
    const double w = rng.uniform(2.8, 3.4);
    const double apex = rng.uniform(0.3, 1.0);
    const auto p = ManifoldParams::apex(xf, apex, w);
    // anchor the cotangent coordinate on the unstable asymptote
    const ManifoldParams zp{xf + apex / w, apex, xf, w};

    const double x = xf + rng.uniform(0.05, 0.5);
    const double xd = rng.uniform(0.2, 1.4);

    const double ds_dx =
        (sigma(x + h, xd, p) - sigma(x - h, xd, p)) / (2 * h);
    const double ds_dv =
        (sigma(x, xd + h, p) - sigma(x, xd - h, p)) / (2 * h);
    const double dz_dx =
        (zeta(x + h, xd, zp, 1.0) - zeta(x - h, xd, zp, 1.0)) / (2 * h);
    const double dz_dv =
        (zeta(x, xd + h, zp, 1.0) - zeta(x, xd - h, zp, 1.0)) / (2 * h);

    const double dot = ds_dx * dz_dx + ds_dv * dz_dv;
    const double ns = std::hypot(ds_dx, ds_dv);
    const double nz = std::hypot(dz_dx, dz_dv);
    CHECK(std::abs(dot) < 1e-6 * ns * nz);
    ++checked;
  }
}

TEST_CASE("zeta grows exponentially along the asymptote") {
  const double w = 3.0;
  const double xf = 0.0;
  const double v0 = 0.5;
  const ManifoldParams zp{xf + v0 / w, v0, xf, w};
  double prev = 0.0;
  for (double t : {0.0, 0.05, 0.1, 0.2, 0.3}) {
    const auto [x, xd] = analyticFlow(xf + v0 / w, v0, xf, w, t);
    const double z = zeta(x, xd, zp, 1.0);
    const double expected = std::exp((1.0 + w * w) * w * t);
    CHECK(z == doctest::Approx(expected).epsilon(1e-9));
    CHECK(z > prev);
    prev = z;
  }
}

TEST_CASE("sensitivity norm of a constant deviation") {
  std::vector<ZetaSigmaSample> samples;
  for (int i = 0; i <= 100; ++i) samples.push_back({i / 100.0, -0.37});
  CHECK(sensitivityNorm(samples, 0.0, 1.0) ==
        doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("sensitivity norm of a half-interval step deviation") {
  std::vector<ZetaSigmaSample> samples;
  const double c = 0.52;
  for (int i = 0; i <= 1000; ++i) {
    const double z = i / 1000.0;
    samples.push_back({z, z < 0.5 ? 0.0 : c});
  }
  CHECK(sensitivityNorm(samples, 0.0, 1.0) ==
        doctest::Approx(c / std::sqrt(2.0)).epsilon(1e-3));
}

TEST_CASE("sensitivity norm rejects bad intervals") {
  std::vector<ZetaSigmaSample> samples{{0.0, 1.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(sensitivityNorm(samples, 0.8, 0.2), EmptyInterval);
  CHECK_THROWS_AS(sensitivityNorm(samples, 0.0, 2.0), EmptyInterval);
  std::vector<ZetaSigmaSample> unordered{{0.0, 1.0}, {0.5, 1.0}, {0.4, 1.0}};
  CHECK_THROWS_AS(sensitivityNorm(unordered, 0.0, 0.5), DomainError);
}

TEST_CASE("disturbance classification") {
  const auto p = ManifoldParams::apex(1.2, 0.6, 3.132);
  PhaseState pre;
  pre.x = 1.0;
  pre.xd = std::sqrt(0.36 + 3.132 * 3.132 * 0.04);

  SUBCASE("positive jump staying on the same asymptote side") {
    PhaseState post = pre;
    post.xd += 0.4;
    const auto rep = classifyDisturbance(pre, post, p);
    CHECK(rep.category == DisturbanceCategory::kSameSideSmall);
    CHECK(rep.sigma_jump > 0.0);
  }
  SUBCASE("post state exactly on the asymptote counts as crossing") {
    // use a pre state beyond the foot so the asymptote value is positive
    PhaseState pre2;
    pre2.x = 1.4;
    pre2.xd = std::sqrt(0.36 + 3.132 * 3.132 * 0.04);
    PhaseState post2 = pre2;
    post2.xd = 3.132 * (pre2.x - 1.2);
    const auto rep = classifyDisturbance(pre2, post2, p);
    CHECK(rep.category == DisturbanceCategory::kAsymptoteCrossing);
  }
  SUBCASE("large positive jump crossing the asymptote") {
    PhaseState pre2;
    pre2.x = 1.4;  // below the asymptote line after a big negative jump
    pre2.xd = 0.9;
    PhaseState post2 = pre2;
    post2.xd = 0.2;  // asymptote value is 0.626: crossed downward
    const auto rep = classifyDisturbance(pre2, post2, p);
    CHECK(rep.category == DisturbanceCategory::kAsymptoteCrossing);
  }
  SUBCASE("small negative jump keeps the motion direction") {
    PhaseState post = pre;
    post.xd -= 0.1;
    const auto rep = classifyDisturbance(pre, post, p);
    CHECK(rep.category == DisturbanceCategory::kSameDirectionSmall);
  }
  SUBCASE("velocity sign flip reverses the direction") {
    PhaseState pre2 = pre;
    pre2.xd = 0.5;
    PhaseState post = pre2;
    post.xd = -0.2;
    const auto rep = classifyDisturbance(pre2, post, p);
    CHECK(rep.category == DisturbanceCategory::kDirectionReversal);
  }
}

TEST_CASE("classification is scale invariant") {
  SplitMix64 rng(23);
  for (int i = 0; i < 50; ++i) {
    const double w = rng.uniform(2.8, 3.4);
    const auto p = ManifoldParams::apex(0.0, rng.uniform(0.2, 1.0), w);
    PhaseState pre;
    pre.x = rng.uniform(-0.4, 0.4);
    pre.xd = rng.uniform(0.05, 1.2);
    PhaseState post = pre;
    post.xd = pre.xd + rng.uniform(-1.5, 1.5);
    const auto base = classifyDisturbance(pre, post, p);

    // uniform positive rescaling of (xd_pre, xd_post, w(x - xf))
    const double k = rng.uniform(0.1, 5.0);
    const auto pk = ManifoldParams::apex(0.0, p.xd0, w);
    PhaseState pre_k = pre;
    PhaseState post_k = post;
    pre_k.xd *= k;
    post_k.xd *= k;
    pre_k.x = pre.x * k;   // scales w(x - xf) by k with the same omega
    post_k.x = pre_k.x;
    const auto scaled = classifyDisturbance(pre_k, post_k, pk);
    CHECK(scaled.category == base.category);
  }
}

TEST_CASE("recoverability radius") {
  SUBCASE("zero torque adds no margin") {
    CHECK(recoverabilityRadius(1e-3, 1.5, 1.1, 0.6, 0.0, kRobot) == 1e-3);
  }
  SUBCASE("hand-evaluated radius") {
    // sigma_0 = eps + (sqrt(2)/2) mu (x_trans - x0) tau_y,
    // mu = 2 sqrt(2) xd_apex^2 / (m g)  =>  eps + 2 xd^2 dx tau / (m g)
    const double expected = 0.001 + 2.0 * 0.36 * 0.4 * 3.0 / 9.81;
    CHECK(recoverabilityRadius(0.001, 1.5, 1.1, 0.6, 3.0, kRobot) ==
          doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("doubling the torque doubles the added margin") {
    const double eps = 1e-3;
    const double r1 = recoverabilityRadius(eps, 1.5, 1.1, 0.6, 1.5, kRobot);
    const double r2 = recoverabilityRadius(eps, 1.5, 1.1, 0.6, 3.0, kRobot);
    CHECK(r2 - eps == doctest::Approx(2.0 * (r1 - eps)).epsilon(1e-12));
  }
  SUBCASE("affine in torque, quadratic in apex speed") {
    const double eps = 2e-3;
    const double taus[3] = {0.5, 1.0, 2.0};
    double values[3];
    for (int i = 0; i < 3; ++i) {
      values[i] = recoverabilityRadius(eps, 1.4, 1.0, 0.7, taus[i], kRobot);
    }
    // affine: the slope between any two points is identical
    const double s01 = (values[1] - values[0]) / (taus[1] - taus[0]);
    const double s12 = (values[2] - values[1]) / (taus[2] - taus[1]);
    CHECK(s01 == doctest::Approx(s12).epsilon(1e-12));
    // quadratic in apex speed: doubling the apex speed quadruples the gain
    const double g1 = recoverabilityRadius(eps, 1.4, 1.0, 0.35, 1.0, kRobot) - eps;
    const double g2 = recoverabilityRadius(eps, 1.4, 1.0, 0.7, 1.0, kRobot) - eps;
    CHECK(g2 == doctest::Approx(4.0 * g1).epsilon(1e-12));
  }
}

TEST_CASE("step progression is 0 at entry and 1 at the transition") {
  const double w = 3.132;
  const auto p = ManifoldParams::apex(1.2, 0.6, w);
  const double x_e = 0.95;
  const double xd_e = std::sqrt(0.36 + w * w * (x_e - 1.2) * (x_e - 1.2));
  const double x_t = 1.45;
  const double xd_t = std::sqrt(0.36 + w * w * (x_t - 1.2) * (x_t - 1.2));
  const StepProgression prog(p, x_e, xd_e, x_t, xd_t);
  CHECK(prog(x_e, xd_e) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(prog(x_t, xd_t) == doctest::Approx(1.0).epsilon(1e-14));

  // monotone along the flow
  double prev = -1.0;
  for (double t = 0.0; t < 0.5; t += 0.02) {
    const auto [x, xd] = analyticFlow(x_e, xd_e, 1.2, w, t);
    const double z = prog(x, xd);
    CHECK(z > prev);
    prev = z;
  }
}
