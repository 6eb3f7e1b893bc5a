#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <functional>
#include <vector>

#include "phasewalk/errors.hpp"

namespace phasewalk {

/// Center-of-mass state: position and velocity, world frame [m, m/s].
struct PhaseState {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double xd = 0.0;
  double yd = 0.0;
  double zd = 0.0;

  bool allFinite() const;
};

/// Linear CoM path plane z = a*x + b*y + c.
struct ComSurface {
  double a = 0.0;  ///< sagittal slope [-]
  double b = 0.0;  ///< lateral slope [-]
  double c = 1.0;  ///< height bias [m]

  /// Vertical distance between the plane and a foot contact point.
  double apexHeight(const Eigen::Vector3d& foot) const {
    return a * foot.x() + b * foot.y() + c - foot.z();
  }
  /// Plane height above a ground-plane point (x, y).
  double heightAt(double x, double y) const { return a * x + b * y + c; }
};

struct RobotParams {
  double mass = 1.0;       ///< [kg]
  double gravity = 9.81;   ///< [m/s^2]
};

/// Control input of the pendulum model: asymptote slope, flywheel
/// moments and the active foot contact.
struct ControlInput {
  double omega = 0.0;   ///< [1/s]
  double tau_x = 0.0;   ///< [N m]
  double tau_y = 0.0;   ///< [N m]
  double tau_z = 0.0;   ///< [N m]
  Eigen::Vector3d foot = Eigen::Vector3d::Zero();  ///< [m]
};

/// One integrator sample.
struct TrajectorySample {
  double t = 0.0;
  PhaseState state;
  ControlInput input;
};

/// Time-ordered rollout; stamps are strictly increasing (or strictly
/// decreasing for backward integration).
using Trajectory = std::vector<TrajectorySample>;

/// Asymptote slope sqrt(g / z_apex) for a contact on a CoM plane.
/// Throws NonPositiveApexHeight when the plane does not clear the foot.
double omegaFromSurface(const ComSurface& surface, const Eigen::Vector3d& foot,
                        const RobotParams& params);

/// Whether the stored omega of a control input is cross-checked against
/// the surface geometry. Recovery controllers treat omega as a free
/// control and run with the check disabled.
enum class OmegaMode { kChecked, kFree };

/// Relative tolerance of the omega/surface consistency check.
inline constexpr double kOmegaConsistencyTol = 1e-9;

/// Time derivative of the phase state under the pendulum vector field.
/// Returned as a PhaseState whose position slots hold velocities and
/// whose velocity slots hold accelerations. The vertical acceleration
/// satisfies zdd = a*xdd + b*ydd identically.
PhaseState pipmDerivative(const PhaseState& state, const ControlInput& input,
                          const ComSurface& surface, const RobotParams& params,
                          OmegaMode mode = OmegaMode::kChecked);

/// Closed-form flow of the zero-torque sagittal (or lateral) channel.
/// Valid for any sign of t.
struct FlowPoint {
  double x;
  double xd;
};
FlowPoint analyticFlow(double x0, double xd0, double x_foot, double omega,
                       double t);

/// Time at which the flow from the apex (x_foot, xd_apex) reaches
/// position x; negative for points behind the foot.
double timeFromApex(double x, double x_foot, double xd_apex, double omega);

enum class IntegratorKind { kRk4, kEuler };

struct IntegrateOptions {
  double dt = 1e-3;                         ///< step, sign sets direction
  std::size_t max_samples = 2'000'000;      ///< stop-predicate safety bound
  IntegratorKind kind = IntegratorKind::kRk4;
  OmegaMode omega_mode = OmegaMode::kChecked;
};

using StopPredicate = std::function<bool(const PhaseState&)>;

/// Fixed-step rollout of the pendulum dynamics, ending at the first
/// sample satisfying `stop` (checked before stepping, so a stop that
/// holds initially yields a single-sample trajectory).
/// Throws MaxSamplesExceeded when the predicate never fires.
Trajectory integrate(const PhaseState& state, const ControlInput& input,
                     const ComSurface& surface, const RobotParams& params,
                     const IntegrateOptions& opts, const StopPredicate& stop);

}  // namespace phasewalk
