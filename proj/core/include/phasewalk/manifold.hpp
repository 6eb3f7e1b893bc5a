#pragma once

#include <span>

#include "phasewalk/pipm.hpp"

namespace phasewalk {

/// Parameters of one tangent/cotangent manifold pair of the sagittal
/// (or lateral) pendulum channel: anchor state, contact position and
/// asymptote slope.
struct ManifoldParams {
  double x0 = 0.0;      ///< anchor position [m]
  double xd0 = 0.0;     ///< anchor velocity [m/s]
  double x_foot = 0.0;  ///< contact position [m]
  double omega = 0.0;   ///< [1/s]

  /// Anchor at the apex state (x_foot, xd_apex).
  static ManifoldParams apex(double x_foot, double xd_apex, double omega) {
    return {x_foot, xd_apex, x_foot, omega};
  }
  bool isApexForm() const { return x0 == x_foot; }
};

/// Tolerance band and progression horizon of an invariant bundle.
struct BundleSpec {
  double epsilon = 1e-3;    ///< |sigma| bound [m^4/s^2]
  double zeta_trans = 1.0;  ///< progression value of the step transition [-]
};

/// Tangent-manifold deviation for a general anchor. Zero exactly on the
/// zero-torque trajectory through the anchor state.
double sigma(double x, double xd, const ManifoldParams& p);

/// Apex-anchored tangent-manifold deviation,
/// (xd_apex^2/omega^2) * (xd^2 - xd_apex^2 - omega^2 (x - x_foot)^2).
double sigmaApex(double x, double xd, double xd_apex, double x_foot,
                 double omega);

/// Cotangent (progression) manifold value through anchor (x0, xd0) with
/// scale zeta0. Throws DomainError in the saddle-adjacent region where
/// the closed form is undefined (zero or sign-mixed velocities, x at the
/// contact, anchor at the contact).
double zeta(double x, double xd, const ManifoldParams& p, double zeta0);

/// Affine reparameterization of the cotangent coordinate, pinned to 0 at
/// the step entry state and 1 at the nominal transition state. Constant
/// exactly on zeta isolines and monotone along forward flow.
class StepProgression {
public:
  StepProgression() = default;
  StepProgression(const ManifoldParams& p, double x_entry, double xd_entry,
                  double x_trans, double xd_trans);

  /// Progression of a state; requires xd > 0.
  double operator()(double x, double xd) const;

private:
  double monomial(double x, double xd) const;

  double omega2_ = 0.0;
  double x_foot_ = 0.0;
  double m_entry_ = 0.0;
  double inv_span_ = 0.0;
};

/// One (zeta, sigma) point along a trajectory.
struct ZetaSigmaSample {
  double zeta;
  double sigma;
};

/// RMS of sigma over the progression interval [zeta_d, zeta_trans],
/// trapezoidal over the given samples (strictly increasing zeta).
/// Throws EmptyInterval when the interval is degenerate or not covered,
/// DomainError when the samples are not monotone in zeta.
double sensitivityNorm(std::span<const ZetaSigmaSample> samples, double zeta_d,
                       double zeta_trans);

enum class DisturbanceCategory {
  kSameSideSmall,      ///< jump keeps the asymptote side and motion direction
  kAsymptoteCrossing,  ///< post state on or across the asymptote line
  kSameDirectionSmall, ///< opposing jump, motion direction kept
  kDirectionReversal,  ///< velocity sign flipped (or zeroed)
};

const char* to_string(DisturbanceCategory c);

struct DisturbanceReport {
  PhaseState pre;
  PhaseState post;
  DisturbanceCategory category = DisturbanceCategory::kSameSideSmall;
  double sigma_jump = 0.0;  ///< sigma(post) - sigma(pre) [m^4/s^2]
};

/// Classifies an instantaneous sagittal velocity jump (same x) against
/// the unstable asymptote xd = omega * (x - x_foot). A post state
/// exactly on the asymptote counts as crossing.
DisturbanceReport classifyDisturbance(const PhaseState& pre,
                                      const PhaseState& post,
                                      const ManifoldParams& p);

/// Outer radius sigma_0 of the practical recoverability bundle for a
/// constant recovery torque tau_y applied over [x0, x_trans].
double recoverabilityRadius(double eps, double x_trans, double x0,
                            double xd_apex, double tau_y,
                            const RobotParams& params);

}  // namespace phasewalk
