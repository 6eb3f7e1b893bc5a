#pragma once

#include <Eigen/Core>
#include <optional>
#include <utility>
#include <vector>

#include "phasewalk/manifold.hpp"
#include "phasewalk/pipm.hpp"

namespace phasewalk {

/// One walking step: foot contact, CoM plane, apex keyframe and heading.
/// The surface is expressed in the global frame; the planner rotates it
/// into each step's walking frame.
struct StepSpec {
  Eigen::Vector3d foot = Eigen::Vector3d::Zero();  ///< global [m]
  ComSurface surface;
  double apex_speed = 0.6;  ///< [m/s]
  double heading = 0.0;     ///< [rad], about vertical
};

/// Planar frame of one step: rotation by `heading` about the vertical
/// axis around `origin`.
struct StepFrame {
  double heading = 0.0;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();

  Eigen::Vector2d toLocal(const Eigen::Vector2d& g) const;
  Eigen::Vector2d toGlobal(const Eigen::Vector2d& l) const;
  Eigen::Vector2d dirToLocal(const Eigen::Vector2d& g) const;
  Eigen::Vector2d dirToGlobal(const Eigen::Vector2d& l) const;
};

/// Degree-5 polynomial bridge between two boundary states, one
/// polynomial per axis. Global frame; local segment time in [0, duration].
struct QuinticSegment {
  double t_start = 0.0;   ///< global time of the segment start
  double duration = 0.0;  ///< [s]
  Eigen::Matrix<double, 3, 6> coeffs = Eigen::Matrix<double, 3, 6>::Zero();

  Eigen::Vector3d position(double s) const;
  Eigen::Vector3d velocity(double s) const;
  Eigen::Vector3d acceleration(double s) const;
};

struct BoundaryState {
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d vel = Eigen::Vector3d::Zero();
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
};

/// Step exit condition in the step's local frame, plus the global time
/// at which it is reached on the nominal plan.
struct StepTransition {
  double x = 0.0;
  double xd = 0.0;
  double zeta = 1.0;
  double time = 0.0;
};

/// Fully planned walking step.
struct StepPlan {
  StepSpec spec;
  StepFrame frame;
  ComSurface surface_local;
  Eigen::Vector3d foot_local = Eigen::Vector3d::Zero();
  double omega = 0.0;
  ManifoldParams manifold;  ///< apex-anchored, local frame
  std::optional<ManifoldParams> next_manifold;  ///< next step's, this frame
  double next_apex_speed = 0.0;
  double y_foot_local = 0.0;
  double entry_time = 0.0;  ///< global [s]
  double apex_time = 0.0;   ///< global [s]
  PhaseState entry_local;
  StepTransition transition;
  Trajectory trajectory;  ///< global frame, uniform sampling
  StepProgression progression;
  std::optional<QuinticSegment> multicontact;  ///< bridge to the next step
};

struct PlannerConfig {
  double dt = 1e-3;                ///< trajectory sample spacing [s]
  double min_apex_speed = 0.03;    ///< [m/s]
  double max_step_length = 0.8;    ///< [m]
  double lateral_tol = 1e-4;       ///< apex lateral speed tolerance [m/s]
  int lateral_max_iter = 30;
  double lateral_halfwidth = 0.6;  ///< search bounds around the guess [m]
  double multicontact_fraction = 0.25;  ///< of step duration; 0 disables
  double final_half_duration = 0.5;     ///< last-step run-out past apex [s]
  double y_start = 0.0;            ///< lateral CoM at the first apex [m]
  double yd_start = 0.0;           ///< [m/s]
};

/// Sagittal transition point between two adjacent manifolds, found by
/// bracketed root-finding of the next manifold's deviation along the
/// current flow. Both deviations vanish to < 1e-10 at the result.
struct TransitionPoint {
  double x;
  double xd;
};
TransitionPoint findStepTransition(const ManifoldParams& current,
                                   const ManifoldParams& next);

/// Newton-Raphson (secant) search for the lateral foot placement that
/// zeroes the lateral velocity at the sagittal apex, integrating the
/// lateral pendulum channel numerically over [0, t_apex].
/// Throws NoConvergence after n_max iterations and OutOfBounds when the
/// bound clamp prevents progress.
double searchLateralFoot(double y_init, double yd_init, double omega,
                         double t_apex, double y_min, double y_max, double tol,
                         int n_max, double dt = 1e-3);

/// Unique quintic bridge matching position, velocity and acceleration at
/// both ends.
QuinticSegment smoothMulticontact(const BoundaryState& pre,
                                  const BoundaryState& post, double T);

/// Multi-step nominal plan: per-step zero-torque rollouts anchored at
/// the apex keyframes, transitions solved between adjacent manifolds,
/// lateral placements searched, trajectories stitched on a shared clock.
/// Headings are ignored (all steps planned in the global frame).
std::vector<StepPlan> generateNominal(const std::vector<StepSpec>& steps,
                                      const RobotParams& params,
                                      const PlannerConfig& cfg = {});

/// Steered variant: each step is planned in a local frame rotated by its
/// heading, the lateral search runs orthogonal to the local sagittal
/// axis, and results are transformed back to the global frame.
std::vector<StepPlan> planSteeredWalk(const std::vector<StepSpec>& steps,
                                      const RobotParams& params,
                                      const PlannerConfig& cfg = {});

}  // namespace phasewalk
