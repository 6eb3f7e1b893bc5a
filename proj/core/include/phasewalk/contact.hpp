#pragma once

#include <Eigen/Core>
#include <numbers>
#include <optional>
#include <utility>

#include "phasewalk/errors.hpp"
#include "phasewalk/pipm.hpp"

namespace phasewalk {

/// Dual point-foot contact configuration.
struct ContactPair {
  Eigen::Vector3d p_left = Eigen::Vector3d::Zero();
  Eigen::Vector3d p_right = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal_left = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d normal_right = Eigen::Vector3d::UnitZ();
  double cone_half_angle = std::numbers::pi / 4.0;  ///< [rad]

  /// Unit axis from the left to the right contact.
  Eigen::Vector3d interFootAxis() const;
};

/// Wrench demanded from the two contacts: total contact force (inertial
/// plus gravity), flywheel moment about the CoM, and the internal
/// tension along the inter-foot line (positive pulls the feet together).
struct WrenchDemand {
  Eigen::Vector3d f_com = Eigen::Vector3d::Zero();    ///< [N]
  Eigen::Vector3d tau_com = Eigen::Vector3d::Zero();  ///< [N m]
  double f_int = 0.0;                                 ///< [N]

  Eigen::Matrix<double, 7, 1> stacked() const;
};

/// Grasp matrix G mapping stacked foot forces (f_left, f_right) to
/// (force balance, moment balance about p_com, internal-force
/// projection). Rows 0-2 are the force balance, rows 3-5 the moment
/// balance, row 6 the projection u.(f_left - f_right)/2 onto the unit
/// inter-foot axis u.
Eigen::Matrix<double, 7, 6> buildGraspMatrix(const ContactPair& pair,
                                             const Eigen::Vector3d& p_com);

/// Minimum-norm foot forces realizing the demand, via a rank-revealing
/// pseudoinverse (singular values below 1e-10 * s_max are truncated).
/// Throws RankDeficient when the grasp matrix loses column rank.
std::pair<Eigen::Vector3d, Eigen::Vector3d> solveReactionForces(
    const ContactPair& pair, const Eigen::Vector3d& p_com,
    const WrenchDemand& demand);

/// Builds a demand whose moment about the inter-foot axis is set to the
/// only value two point contacts can produce for the given total force;
/// no moment is demanded about the other axes. Such demands are exactly
/// representable by the grasp matrix.
WrenchDemand makeConsistentDemand(const ContactPair& pair,
                                  const Eigen::Vector3d& p_com,
                                  const Eigen::Vector3d& f_total,
                                  double f_int);

struct ConeCheck {
  bool feasible = false;
  double margin = 0.0;  ///< half_angle - angle(force, normal) [rad]
};

/// Unilateral friction-cone test. A zero force is feasible with full
/// margin; a pulling force (force.normal <= 0) is infeasible.
ConeCheck checkFrictionCone(const Eigen::Vector3d& force,
                            const Eigen::Vector3d& normal, double half_angle);

/// Smallest internal force in [0, f_int_max] for which both contact
/// forces lie inside their friction cones, found by bisection.
/// Empty when no value in the range is feasible.
std::optional<double> minFeasibleInternalForce(const ContactPair& pair,
                                               const Eigen::Vector3d& p_com,
                                               const Eigen::Vector3d& f_total,
                                               double f_int_max,
                                               double tol = 1e-6);

}  // namespace phasewalk
