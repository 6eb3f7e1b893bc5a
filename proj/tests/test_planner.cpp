#include <Eigen/Geometry>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "phasewalk/planner.hpp"
#include "phasewalk/scenario.hpp"

using namespace phasewalk;

namespace {

const RobotParams kRobot{1.0, 9.81};

std::vector<StepSpec> flatWalk(int n, double stride = 0.5,
                               double apex = 0.6) {
  std::vector<StepSpec> steps(n);
  for (int q = 0; q < n; ++q) {
    steps[q].foot = {stride * q, (q % 2 == 0) ? 0.28 : -0.28, 0.0};
    steps[q].surface = {0.0, 0.0, 1.0};
    steps[q].apex_speed = apex;
  }
  return steps;
}

// velocity on the flow through the manifold anchor at position x
double flowSpeed(const ManifoldParams& m, double x) {
  const double w2 = m.omega * m.omega;
  const double r = x - m.x_foot;
  const double r0 = m.x0 - m.x_foot;
  return std::sqrt(m.xd0 * m.xd0 + w2 * (r * r - r0 * r0));
}

}  // namespace

TEST_CASE("transition between identical shifted manifolds is the midpoint") {
  const double w = 3.132;
  const double d = 0.5;
  const auto a = ManifoldParams::apex(1.0, 0.6, w);
  const auto b = ManifoldParams::apex(1.0 + d, 0.6, w);
  const auto tp = findStepTransition(a, b);
  CHECK(tp.x == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(tp.xd ==
        doctest::Approx(std::sqrt(0.36 + w * w * d * d / 4)).epsilon(1e-12));
  CHECK(std::abs(sigma(tp.x, tp.xd, a)) < 1e-10);
  CHECK(std::abs(sigma(tp.x, tp.xd, b)) < 1e-10);
}

TEST_CASE("a faster next apex pulls the transition toward the next foot") {
  const double w = 3.132;
  const auto a = ManifoldParams::apex(1.0, 0.6, w);
  double prev_x = 0.0;
  for (double apex_next : {0.4, 0.6, 0.9, 1.3}) {
    const auto b = ManifoldParams::apex(1.5, apex_next, w);
    const auto tp = findStepTransition(a, b);
    CHECK(tp.x > prev_x);
    prev_x = tp.x;
  }
}

TEST_CASE("transition agrees with a dense closest-point sweep") {
  const auto a = ManifoldParams::apex(1.0, 0.5, 3.132);
  const auto b = ManifoldParams::apex(1.55, 0.75, 2.9);
  const auto tp = findStepTransition(a, b);

  // brute force: walk both manifolds and find the nearest sample pair
  double best = std::numeric_limits<double>::infinity();
  double best_x = 0.0;
  for (double x = 1.0; x <= 1.55; x += 1e-6) {
    const double va = flowSpeed(a, x);
    const double arg_b = b.xd0 * b.xd0 +
                         b.omega * b.omega * ((x - b.x_foot) * (x - b.x_foot) -
                                              (b.x0 - b.x_foot) * (b.x0 - b.x_foot));
    if (arg_b < 0.0) continue;
    const double vb = std::sqrt(arg_b);
    const double gap = std::abs(va - vb);
    if (gap < best) {
      best = gap;
      best_x = x;
    }
  }
  CHECK(std::abs(best_x - tp.x) < 1e-5);
  CHECK(std::abs(flowSpeed(a, best_x) - tp.xd) < 1e-4);
}

TEST_CASE("transition not found when the manifolds never meet") {
  // next apex faster than anything the current flow reaches in the bracket
  const auto a = ManifoldParams::apex(1.0, 0.2, 3.132);
  const auto b = ManifoldParams::apex(1.1, 5.0, 3.132);
  CHECK_THROWS_AS(findStepTransition(a, b), TransitionNotFound);
}

TEST_CASE("lateral search converges immediately at an equilibrium") {
  const double w = 3.132;
  const double y_foot = searchLateralFoot(0.1, 0.0, w, 0.4, -0.5, 0.7, 1e-4, 15);
  CHECK(y_foot == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("lateral search zeroes the apex velocity") {
  const double w = 3.132;
  const double t_apex = 0.38;
  const double y0 = 0.05;
  const double yd0 = 0.31;
  const double y_foot =
      searchLateralFoot(y0, yd0, w, t_apex, -0.6, 0.8, 1e-6, 30);

  const auto [y, yd] = analyticFlow(y0, yd0, y_foot, w, t_apex);
  CHECK(std::abs(yd) < 2e-6);

  // closed form: yd(t)=0  =>  y_foot = y0 + yd0 cosh(wT)/(w sinh(wT))
  const double closed =
      y0 + yd0 * std::cosh(w * t_apex) / (w * std::sinh(w * t_apex));
  CHECK(y_foot == doctest::Approx(closed).epsilon(1e-6));
}

TEST_CASE("lateral search agrees with a bisection oracle") {
  const double w = 3.0;
  const double t_apex = 0.42;
  const double y0 = -0.02;
  const double yd0 = 0.22;
  const double lo = -0.6;
  const double hi = 0.8;
  const double newton = searchLateralFoot(y0, yd0, w, t_apex, lo, hi, 1e-7, 30);

  auto apexVel = [&](double yf) {
    return analyticFlow(y0, yd0, yf, w, t_apex).xd;
  };
  double a = lo;
  double b = hi;
  REQUIRE(apexVel(a) * apexVel(b) < 0.0);
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (a + b);
    if (apexVel(a) * apexVel(mid) <= 0.0) {
      b = mid;
    } else {
      a = mid;
    }
  }
  CHECK(std::abs(newton - 0.5 * (a + b)) < 1e-6);
}

TEST_CASE("lateral search failure modes") {
  CHECK_THROWS_AS(searchLateralFoot(0.0, 0.5, 3.0, 0.4, -0.01, 0.01, 1e-9, 4),
                  OutOfBounds);
  CHECK_THROWS_AS(searchLateralFoot(0.0, 0.5, 3.0, 0.4, 0.3, 0.2, 1e-6, 10),
                  OutOfBounds);
}

TEST_CASE("single-step nominal plan stays on its manifold") {
  const auto plans = generateNominal(flatWalk(1), kRobot);
  REQUIRE(plans.size() == 1);
  const StepPlan& p = plans[0];
  REQUIRE(p.trajectory.size() > 100);
  for (const auto& s : p.trajectory) {
    CHECK(std::abs(sigma(s.state.x, s.state.xd, p.manifold)) < 1e-6);
  }
}

TEST_CASE("two identical steps meet at the sagittal midpoint") {
  const auto plans = generateNominal(flatWalk(2), kRobot);
  REQUIRE(plans.size() == 2);
  CHECK(plans[0].transition.x == doctest::Approx(0.25).epsilon(1e-9));
  // transition state on both manifolds
  const double st0 =
      sigma(plans[0].transition.x, plans[0].transition.xd, plans[0].manifold);
  const double st1 =
      sigma(plans[0].transition.x, plans[0].transition.xd, plans[1].manifold);
  CHECK(std::abs(st0) < 1e-6);
  CHECK(std::abs(st1) < 1e-6);
}

TEST_CASE("plan trajectories are continuous across stitches") {
  const auto plans = generateNominal(flatWalk(4), kRobot);
  for (std::size_t q = 0; q + 1 < plans.size(); ++q) {
    const auto& last = plans[q].trajectory.back();
    const auto& first = plans[q + 1].trajectory.front();
    CHECK(last.t == doctest::Approx(first.t).epsilon(1e-12));
    CHECK(std::abs(last.state.x - first.state.x) < 1e-9);
    CHECK(std::abs(last.state.y - first.state.y) < 1e-9);
    CHECK(std::abs(last.state.z - first.state.z) < 1e-9);
    CHECK(std::abs(last.state.xd - first.state.xd) < 1e-9);
    CHECK(std::abs(last.state.yd - first.state.yd) < 1e-9);
  }
}

TEST_CASE("every lateral placement bounds the apex velocity") {
  const auto plans = generateNominal(flatWalk(6), kRobot);
  for (std::size_t q = 1; q < plans.size(); ++q) {
    const StepPlan& p = plans[q];
    const double t_apex = p.apex_time - p.entry_time;
    const auto [y, yd] = analyticFlow(p.entry_local.y, p.entry_local.yd,
                                      p.y_foot_local, p.omega, t_apex);
    CHECK(std::abs(yd) < 2e-4);
  }
}

TEST_CASE("transition consistency along a short staircase") {
  std::vector<StepSpec> steps = flatWalk(3);
  steps[1].foot.z() = 0.12;
  steps[1].surface = {0.24, 0.0, 1.0 + 0.12 - 0.24 * 0.5};
  steps[2].foot.z() = 0.05;
  steps[2].surface = {0.0, 0.0, 1.05};
  const auto plans = generateNominal(steps, kRobot);
  for (std::size_t q = 0; q + 1 < plans.size(); ++q) {
    const auto& tr = plans[q].transition;
    CHECK(std::abs(sigma(tr.x, tr.xd, plans[q].manifold)) < 1e-6);
    CHECK(std::abs(sigma(tr.x, tr.xd, *plans[q].next_manifold)) < 1e-6);
  }
}

TEST_CASE("unreachable strides and degenerate keyframes are rejected") {
  auto steps = flatWalk(2);
  steps[1].foot.x() = 1.5;
  CHECK_THROWS_AS(generateNominal(steps, kRobot), Error);

  auto slow = flatWalk(1);
  slow[0].apex_speed = 0.001;
  CHECK_THROWS_AS(generateNominal(slow, kRobot), Error);

  CHECK_THROWS_AS(generateNominal({}, kRobot), Error);
}

TEST_CASE("quintic bridge with identical rest boundaries is constant") {
  BoundaryState rest;
  rest.pos = {0.3, -0.1, 1.0};
  const QuinticSegment seg = smoothMulticontact(rest, rest, 0.2);
  for (double s : {0.0, 0.05, 0.1, 0.2}) {
    CHECK((seg.position(s) - rest.pos).norm() < 1e-12);
    CHECK(seg.velocity(s).norm() < 1e-12);
    CHECK(seg.acceleration(s).norm() < 1e-12);
  }
}

TEST_CASE("quintic bridge meets all six boundary conditions") {
  SplitMix64 rng(13);
  for (int i = 0; i < 20; ++i) {
    BoundaryState pre, post;
    for (int k = 0; k < 3; ++k) {
      pre.pos[k] = rng.uniform(-1, 1);
      pre.vel[k] = rng.uniform(-1, 1);
      pre.acc[k] = rng.uniform(-5, 5);
      post.pos[k] = rng.uniform(-1, 1);
      post.vel[k] = rng.uniform(-1, 1);
      post.acc[k] = rng.uniform(-5, 5);
    }
    const double T = rng.uniform(0.05, 0.5);
    const QuinticSegment seg = smoothMulticontact(pre, post, T);
    CHECK((seg.position(0) - pre.pos).norm() < 1e-9);
    CHECK((seg.velocity(0) - pre.vel).norm() < 1e-9);
    CHECK((seg.acceleration(0) - pre.acc).norm() < 1e-9);
    CHECK((seg.position(T) - post.pos).norm() < 1e-9);
    CHECK((seg.velocity(T) - post.vel).norm() < 1e-9);
    CHECK((seg.acceleration(T) - post.acc).norm() < 1e-9);
  }
}

TEST_CASE("multicontact windows match the adjacent flows") {
  const auto plans = generateNominal(flatWalk(3), kRobot);
  REQUIRE(plans[0].multicontact.has_value());
  const QuinticSegment& seg = *plans[0].multicontact;

  // boundary continuity against the sampled plan trajectories
  const double t0 = seg.t_start;
  const double t1 = seg.t_start + seg.duration;
  CHECK(t0 > plans[0].apex_time);
  CHECK(t1 < plans[1].apex_time);
  const Eigen::Vector3d p_begin = seg.position(0.0);
  const Eigen::Vector3d p_end = seg.position(seg.duration);

  // locate bracketing samples in the plans
  auto stateAt = [](const Trajectory& traj, double t) {
    for (const auto& s : traj) {
      if (std::abs(s.t - t) < 5e-4) return s.state;
    }
    REQUIRE(false);
    return traj.front().state;
  };
  const PhaseState b0 = stateAt(plans[0].trajectory, t0);
  const PhaseState b1 = stateAt(plans[1].trajectory, t1);
  CHECK(std::abs(b0.x - p_begin.x()) < 2e-3);
  CHECK(std::abs(b1.x - p_end.x()) < 2e-3);
}

TEST_CASE("steered plan with zero headings equals the nominal plan") {
  const auto steps = flatWalk(3);
  const auto a = generateNominal(steps, kRobot);
  const auto b = planSteeredWalk(steps, kRobot);
  REQUIRE(a.size() == b.size());
  for (std::size_t q = 0; q < a.size(); ++q) {
    REQUIRE(a[q].trajectory.size() == b[q].trajectory.size());
    for (std::size_t i = 0; i < a[q].trajectory.size(); ++i) {
      CHECK(a[q].trajectory[i].state.x == b[q].trajectory[i].state.x);
      CHECK(a[q].trajectory[i].state.y == b[q].trajectory[i].state.y);
    }
  }
}

TEST_CASE("planning a rotated scenario equals rotating the plan") {
  const double phi = 0.7;
  const Eigen::Rotation2Dd rot(phi);

  StepSpec base;
  base.foot = {0.8, 0.28, 0.0};
  base.surface = {0.1, 0.0, 1.0 - 0.1 * 0.8};
  base.apex_speed = 0.55;
  base.heading = 0.0;

  StepSpec rotated;
  const Eigen::Vector2d f = rot * base.foot.head<2>();
  rotated.foot = {f.x(), f.y(), 0.0};
  const Eigen::Vector2d ab = rot * Eigen::Vector2d(base.surface.a, 0.0);
  rotated.surface = {ab.x(), ab.y(), base.surface.c};
  rotated.apex_speed = base.apex_speed;
  rotated.heading = phi;

  const auto plan_a = planSteeredWalk({base}, kRobot);
  const auto plan_b = planSteeredWalk({rotated}, kRobot);
  REQUIRE(plan_a[0].trajectory.size() == plan_b[0].trajectory.size());
  for (std::size_t i = 0; i < plan_a[0].trajectory.size(); ++i) {
    const auto& sa = plan_a[0].trajectory[i].state;
    const auto& sb = plan_b[0].trajectory[i].state;
    const Eigen::Vector2d pa = rot * Eigen::Vector2d(sa.x, sa.y);
    const Eigen::Vector2d va = rot * Eigen::Vector2d(sa.xd, sa.yd);
    CHECK(std::abs(pa.x() - sb.x) < 1e-9);
    CHECK(std::abs(pa.y() - sb.y) < 1e-9);
    CHECK(std::abs(va.x() - sb.xd) < 1e-9);
    CHECK(std::abs(va.y() - sb.yd) < 1e-9);
    CHECK(std::abs(sa.z - sb.z) < 1e-9);
  }
}

TEST_CASE("constant heading increments walk a circle") {
  const int n = 20;
  const double dtheta = 2.0 * std::numbers::pi / 40.0;
  const double stride = 0.4;

  std::vector<StepSpec> steps(n);
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  for (int q = 0; q < n; ++q) {
    const double heading = q * dtheta;
    const Eigen::Vector2d dir(std::cos(heading), std::sin(heading));
    const Eigen::Vector2d lat(-std::sin(heading), std::cos(heading));
    if (q > 0) center += dir * stride;
    const Eigen::Vector2d xy =
        center + lat * ((q % 2 == 0) ? 0.28 : -0.28);
    steps[q].foot = {xy.x(), xy.y(), 0.0};
    steps[q].surface = {0.0, 0.0, 1.0};
    steps[q].apex_speed = 0.6;
    steps[q].heading = heading;
  }

  const auto plans = planSteeredWalk(steps, kRobot);
  REQUIRE(plans.size() == static_cast<std::size_t>(n));

  // the walk-center path (feet midline) should hug a circle of radius
  // stride / dtheta around its centroid
  const double radius_expected = stride / dtheta;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  std::vector<Eigen::Vector2d> mids;
  for (int q = 1; q < n; ++q) {
    const Eigen::Vector2d mid =
        0.5 * (plans[q].spec.foot.head<2>() + plans[q - 1].spec.foot.head<2>());
    mids.push_back(mid);
    centroid += mid;
  }
  centroid /= static_cast<double>(mids.size());
  for (const auto& mid : mids) {
    const double r = (mid - centroid).norm();
    CHECK(r > 0.5 * radius_expected);
    CHECK(r < 1.5 * radius_expected);
  }
}
