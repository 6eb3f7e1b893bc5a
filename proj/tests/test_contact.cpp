#include <Eigen/Geometry>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "phasewalk/contact.hpp"
#include "phasewalk/scenario.hpp"

using namespace phasewalk;

namespace {

ContactPair symmetricPair() {
  ContactPair pair;
  pair.p_left = {-0.1, 0.0, 0.0};
  pair.p_right = {0.1, 0.0, 0.0};
  return pair;
}

Eigen::Vector3d randomVec(SplitMix64& rng, double scale) {
  return {rng.uniform(-scale, scale), rng.uniform(-scale, scale),
          rng.uniform(-scale, scale)};
}

}  // namespace

TEST_CASE("grasp matrix structure against hand-built balance rows") {
  const ContactPair pair = symmetricPair();
  const Eigen::Vector3d com{0.0, 0.0, 1.0};
  const auto g = buildGraspMatrix(pair, com);

  // force balance rows: identity blocks
  CHECK((g.block<3, 3>(0, 0) - Eigen::Matrix3d::Identity()).norm() == 0.0);
  CHECK((g.block<3, 3>(0, 3) - Eigen::Matrix3d::Identity()).norm() == 0.0);

  // moment rows: (p - com) x f, spot-checked column by column
  const Eigen::Vector3d rl = pair.p_left - com;
  const Eigen::Vector3d rr = pair.p_right - com;
  for (int c = 0; c < 3; ++c) {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[c] = 1.0;
    CHECK((g.block<3, 3>(3, 0).col(c) - rl.cross(e)).norm() < 1e-15);
    CHECK((g.block<3, 3>(3, 3).col(c) - rr.cross(e)).norm() < 1e-15);
  }

  // internal row: +-u/2 along the inter-foot axis
  CHECK(g(6, 0) == doctest::Approx(0.5));
  CHECK(g(6, 3) == doctest::Approx(-0.5));
  CHECK(g(6, 1) == 0.0);
  CHECK(g(6, 2) == 0.0);
}

TEST_CASE("equal forces orthogonal to the axis produce no internal force") {
  const ContactPair pair = symmetricPair();
  const auto g = buildGraspMatrix(pair, {0.0, 0.0, 1.0});
  Eigen::Matrix<double, 6, 1> f;
  f << 0.0, 2.0, 5.0, 0.0, 2.0, 5.0;  // both forces orthogonal to x
  const auto w = g * f;
  CHECK(w(6) == 0.0);
}

TEST_CASE("grasp matrix is invariant under common translations") {
  SplitMix64 rng(3);
  ContactPair pair;
  pair.p_left = randomVec(rng, 0.5);
  pair.p_right = randomVec(rng, 0.5) + Eigen::Vector3d(1, 0, 0);
  const Eigen::Vector3d com = randomVec(rng, 0.3) + Eigen::Vector3d(0, 0, 1);
  const Eigen::Vector3d offset = randomVec(rng, 2.0);

  const auto g0 = buildGraspMatrix(pair, com);
  ContactPair moved = pair;
  moved.p_left += offset;
  moved.p_right += offset;
  const auto g1 = buildGraspMatrix(moved, com + offset);
  CHECK((g0 - g1).norm() < 1e-12);
}

TEST_CASE("degenerate contacts are rejected") {
  ContactPair pair;
  pair.p_left = pair.p_right = {0.2, 0.0, 0.0};
  CHECK_THROWS_AS(buildGraspMatrix(pair, {0, 0, 1}), DegenerateContacts);
}

TEST_CASE("symmetric vertical load splits in half") {
  const ContactPair pair = symmetricPair();
  const double mg = 9.81;
  WrenchDemand demand;
  demand.f_com = {0.0, 0.0, mg};
  const auto [fl, fr] = solveReactionForces(pair, {0.0, 0.0, 1.0}, demand);
  CHECK((fl - Eigen::Vector3d(0, 0, mg / 2)).norm() < 1e-12);
  CHECK((fr - Eigen::Vector3d(0, 0, mg / 2)).norm() < 1e-12);
}

TEST_CASE("internal tension adds equal and opposite axial components") {
  const ContactPair pair = symmetricPair();
  const Eigen::Vector3d com{0.0, 0.0, 1.0};
  WrenchDemand demand;
  demand.f_com = {0.0, 0.0, 9.81};

  const auto [fl0, fr0] = solveReactionForces(pair, com, demand);
  demand.f_int = 250.0;
  const auto [fl1, fr1] = solveReactionForces(pair, com, demand);

  const Eigen::Vector3d u = pair.interFootAxis();
  const Eigen::Vector3d dl = fl1 - fl0;
  const Eigen::Vector3d dr = fr1 - fr0;
  CHECK((dl - 250.0 * u).norm() < 1e-9);
  CHECK((dr + 250.0 * u).norm() < 1e-9);
  CHECK((dl + dr).norm() < 1e-9);
}

TEST_CASE("round trip over random realizable demands") {
  SplitMix64 rng(29);
  for (int i = 0; i < 100; ++i) {
    ContactPair pair;
    pair.p_left = randomVec(rng, 0.5);
    pair.p_right = pair.p_left + Eigen::Vector3d(rng.uniform(0.2, 1.0),
                                                 rng.uniform(-0.3, 0.3),
                                                 rng.uniform(-0.3, 0.3));
    const Eigen::Vector3d com = 0.5 * (pair.p_left + pair.p_right) +
                                Eigen::Vector3d(0, 0, rng.uniform(0.8, 1.2));
    const auto g = buildGraspMatrix(pair, com);

    Eigen::Matrix<double, 6, 1> f_random;
    for (int k = 0; k < 6; ++k) f_random[k] = rng.uniform(-100.0, 100.0);
    const Eigen::Matrix<double, 7, 1> demand_vec = g * f_random;

    WrenchDemand demand;
    demand.f_com = demand_vec.head<3>();
    demand.tau_com = demand_vec.segment<3>(3);
    demand.f_int = demand_vec(6);

    const auto [fl, fr] = solveReactionForces(pair, com, demand);
    Eigen::Matrix<double, 6, 1> f_solved;
    f_solved << fl, fr;
    const double rel = (g * f_solved - demand_vec).norm() /
                       std::max(1.0, demand_vec.norm());
    CHECK(rel < 1e-9);
  }
}

TEST_CASE("consistent demands built from a total force round trip exactly") {
  SplitMix64 rng(31);
  for (int i = 0; i < 50; ++i) {
    ContactPair pair;
    pair.p_left = {0.0, 0.1, 0.0};
    pair.p_right = {rng.uniform(0.3, 0.7), -0.1, rng.uniform(-0.2, 0.2)};
    const Eigen::Vector3d com{rng.uniform(0.1, 0.4), rng.uniform(-0.05, 0.05),
                              1.0};
    const Eigen::Vector3d f_total =
        randomVec(rng, 30.0) + Eigen::Vector3d(0, 0, 50.0);
    const WrenchDemand demand =
        makeConsistentDemand(pair, com, f_total, rng.uniform(0.0, 100.0));
    const auto [fl, fr] = solveReactionForces(pair, com, demand);
    const auto g = buildGraspMatrix(pair, com);
    Eigen::Matrix<double, 6, 1> f_solved;
    f_solved << fl, fr;
    const double rel = (g * f_solved - demand.stacked()).norm() /
                       std::max(1.0, demand.stacked().norm());
    CHECK(rel < 1e-9);
  }
}

TEST_CASE("internal force never changes the force sum") {
  SplitMix64 rng(37);
  ContactPair pair;
  pair.p_left = {0.0, 0.1, 0.0};
  pair.p_right = {0.5, -0.1, 0.1};
  const Eigen::Vector3d com{0.25, 0.0, 1.0};
  const Eigen::Vector3d f_total{5.0, -2.0, 40.0};
  const Eigen::Vector3d u = pair.interFootAxis();

  const WrenchDemand base = makeConsistentDemand(pair, com, f_total, 0.0);
  const auto [fl0, fr0] = solveReactionForces(pair, com, base);
  for (int i = 0; i < 10; ++i) {
    const double f_int = rng.uniform(-50.0, 150.0);
    const WrenchDemand d = makeConsistentDemand(pair, com, f_total, f_int);
    const auto [fl, fr] = solveReactionForces(pair, com, d);
    CHECK(((fl + fr) - (fl0 + fr0)).norm() < 1e-9);
    // the difference channel moves along the inter-foot axis only
    const Eigen::Vector3d diff = (fl - fr) - (fl0 - fr0);
    CHECK((diff - diff.dot(u) * u).norm() < 1e-9);
  }
}

TEST_CASE("friction cone checks") {
  const Eigen::Vector3d n{0.0, 0.0, 1.0};
  const double half = std::numbers::pi / 4.0;

  SUBCASE("force along the normal has full margin") {
    const auto r = checkFrictionCone({0, 0, 10}, n, half);
    CHECK(r.feasible);
    CHECK(r.margin == doctest::Approx(half).epsilon(1e-12));
  }
  SUBCASE("exactly on the cone boundary is feasible") {
    const auto r = checkFrictionCone({7.0, 0, 7.0}, n, half);
    CHECK(r.feasible);
    CHECK(r.margin == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("pulling contact is infeasible") {
    const auto r = checkFrictionCone({0, 0, -5}, n, half);
    CHECK_FALSE(r.feasible);
  }
  SUBCASE("zero force is feasible with full margin") {
    const auto r = checkFrictionCone({0, 0, 0}, n, half);
    CHECK(r.feasible);
    CHECK(r.margin == half);
  }
}

TEST_CASE("internal tension widens the cone margin on a wedge") {
  // steep facing walls: without tension both reactions sit outside the
  // 45 degree cones, pulling the feet together rotates them inward
  ContactPair pair;
  pair.p_left = {-0.3, 0.0, 0.0};
  pair.p_right = {0.3, 0.0, 0.0};
  const double wall = 70.0 * std::numbers::pi / 180.0;
  pair.normal_left = {std::sin(wall), 0.0, std::cos(wall)};
  pair.normal_right = {-std::sin(wall), 0.0, std::cos(wall)};
  const Eigen::Vector3d com{0.0, 0.0, 0.8};
  const Eigen::Vector3d f_total{0.0, 0.0, 9.81};

  double prev_margin = -10.0;
  for (double f_int : {0.0, 2.0, 4.0, 6.0, 8.0, 10.0}) {
    const WrenchDemand d = makeConsistentDemand(pair, com, f_total, f_int);
    const auto [fl, fr] = solveReactionForces(pair, com, d);
    const double margin = std::min(
        checkFrictionCone(fl, pair.normal_left, pair.cone_half_angle).margin,
        checkFrictionCone(fr, pair.normal_right, pair.cone_half_angle).margin);
    CHECK(margin > prev_margin);
    prev_margin = margin;
  }

  const auto f_min = minFeasibleInternalForce(pair, com, f_total, 100.0);
  REQUIRE(f_min.has_value());
  CHECK(*f_min > 0.0);
  const WrenchDemand d = makeConsistentDemand(pair, com, f_total, *f_min);
  const auto [fl, fr] = solveReactionForces(pair, com, d);
  CHECK(checkFrictionCone(fl, pair.normal_left, pair.cone_half_angle).feasible);
  CHECK(
      checkFrictionCone(fr, pair.normal_right, pair.cone_half_angle).feasible);
}
