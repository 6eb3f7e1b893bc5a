#include "phasewalk/contact.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <cmath>

namespace phasewalk {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(),
       v.z(), 0, -v.x(),
      -v.y(), v.x(), 0;
  return m;
}

}  // namespace

Eigen::Vector3d ContactPair::interFootAxis() const {
  const Eigen::Vector3d d = p_right - p_left;
  const double len = d.norm();
  if (len <= 0.0) throw DegenerateContacts("contact points coincide");
  return d / len;
}

Eigen::Matrix<double, 7, 1> WrenchDemand::stacked() const {
  Eigen::Matrix<double, 7, 1> w;
  w << f_com, tau_com, f_int;
  return w;
}

Eigen::Matrix<double, 7, 6> buildGraspMatrix(const ContactPair& pair,
                                             const Eigen::Vector3d& p_com) {
  const Eigen::Vector3d u = pair.interFootAxis();

  Eigen::Matrix<double, 7, 6> g = Eigen::Matrix<double, 7, 6>::Zero();
  g.block<3, 3>(0, 0) = Eigen::Matrix3d::Identity();
  g.block<3, 3>(0, 3) = Eigen::Matrix3d::Identity();
  g.block<3, 3>(3, 0) = skew(pair.p_left - p_com);
  g.block<3, 3>(3, 3) = skew(pair.p_right - p_com);
  g.block<1, 3>(6, 0) = 0.5 * u.transpose();
  g.block<1, 3>(6, 3) = -0.5 * u.transpose();
  return g;
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> solveReactionForces(
    const ContactPair& pair, const Eigen::Vector3d& p_com,
    const WrenchDemand& demand) {
  const Eigen::Matrix<double, 7, 6> g = buildGraspMatrix(pair, p_com);

  Eigen::JacobiSVD<Eigen::Matrix<double, 7, 6>> svd(
      g, Eigen::ComputeFullU | Eigen::ComputeFullV);
  svd.setThreshold(1e-10);
  if (svd.rank() < 6) {
    throw RankDeficient("grasp matrix is not full column rank");
  }
  const Eigen::Matrix<double, 6, 1> f = svd.solve(demand.stacked());
  return {f.head<3>(), f.tail<3>()};
}

WrenchDemand makeConsistentDemand(const ContactPair& pair,
                                  const Eigen::Vector3d& p_com,
                                  const Eigen::Vector3d& f_total,
                                  double f_int) {
  const Eigen::Vector3d u = pair.interFootAxis();
  const Eigen::Vector3d r_mid = 0.5 * (pair.p_left + pair.p_right) - p_com;

  WrenchDemand d;
  d.f_com = f_total;
  d.tau_com = u.dot(r_mid.cross(f_total)) * u;
  d.f_int = f_int;
  return d;
}

ConeCheck checkFrictionCone(const Eigen::Vector3d& force,
                            const Eigen::Vector3d& normal, double half_angle) {
  const double f_norm = force.norm();
  if (f_norm == 0.0) return {true, half_angle};

  const double along = force.dot(normal);
  if (along <= 0.0) {
    const double angle = std::acos(std::clamp(along / f_norm, -1.0, 1.0));
    return {false, half_angle - angle};
  }
  const double angle = std::acos(std::clamp(along / f_norm, -1.0, 1.0));
  return {angle <= half_angle, half_angle - angle};
}

std::optional<double> minFeasibleInternalForce(const ContactPair& pair,
                                               const Eigen::Vector3d& p_com,
                                               const Eigen::Vector3d& f_total,
                                               double f_int_max, double tol) {
  auto feasible = [&](double f_int) {
    const auto [fl, fr] = solveReactionForces(
        pair, p_com, makeConsistentDemand(pair, p_com, f_total, f_int));
    return checkFrictionCone(fl, pair.normal_left, pair.cone_half_angle)
               .feasible &&
           checkFrictionCone(fr, pair.normal_right, pair.cone_half_angle)
               .feasible;
  };

  if (feasible(0.0)) return 0.0;
  if (!feasible(f_int_max)) return std::nullopt;

  double lo = 0.0;
  double hi = f_int_max;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace phasewalk
