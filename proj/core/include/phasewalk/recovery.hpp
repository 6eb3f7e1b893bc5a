#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phasewalk/manifold.hpp"
#include "phasewalk/pipm.hpp"
#include "phasewalk/planner.hpp"

namespace phasewalk {

/// Continuous recovery control variables of the sagittal channel.
struct ControlPair {
  double omega = 0.0;  ///< [1/s]
  double tau_y = 0.0;  ///< [N m]
};

/// Uniform grid axis over [min, min + (count-1)*res].
struct GridAxis {
  double min = 0.0;
  double res = 1.0;
  int count = 0;

  double value(int i) const { return min + i * res; }
  double max() const { return value(count - 1); }
  bool contains(double v) const { return v >= min && v <= max(); }
  /// Nearest index; exact midpoints break toward the lower index.
  /// Throws OutOfGrid when v is outside [min, max].
  int quantize(double v) const;
};

/// Dynamic-programming configuration: sagittal stage/state grids,
/// admissible control grids, cost weights and discount.
struct DpParams {
  double stage_min = 0.9;    ///< [m]
  double stage_max = 1.5;    ///< [m]
  double stage_res = 0.01;   ///< [m]
  double state_min = 0.03;   ///< [m/s]
  double state_max = 1.5;    ///< [m/s]
  double state_res = 0.01;   ///< [m/s]
  double omega_min = 2.83;   ///< [1/s]
  double omega_max = 3.43;   ///< [1/s]
  int omega_count = 13;
  double tau_min = -3.0;     ///< [N m]
  double tau_max = 3.0;      ///< [N m]
  int tau_count = 13;
  double alpha = 100.0;      ///< terminal velocity weight
  double beta = 4e4;         ///< sigma tracking weight
  double gamma1 = 5.0;       ///< tau_y effort weight
  double gamma2 = 5.0;       ///< omega deviation weight
  double eta = 1.0;          ///< stage discount in (0, 1]
  double omega_ref = 3.13;   ///< [1/s]
  double tau_ref = 0.0;      ///< [N m]

  GridAxis stageAxis() const;
  GridAxis stateAxis() const;
  GridAxis omegaAxis() const;
  GridAxis tauAxis() const;
  void validate() const;
};

/// Precomputed optimal recovery policy over the (stage, state) grid.
/// Values of infeasible cells are +infinity.
struct PolicyTable {
  DpParams params;
  // step the table was built for
  double x_foot = 0.0;
  double apex_speed = 0.0;
  double omega_nominal = 0.0;
  double xd_pred = 0.0;  ///< predicted transition velocity [m/s]
  double mass = 1.0;
  double gravity = 9.81;

  std::vector<double> value;          ///< stage-major, stages x states
  std::vector<ControlPair> policy;    ///< (stages-1) x states
  std::uint64_t build_hash = 0;

  int stageCount() const { return params.stageAxis().count; }
  int stateCount() const { return params.stateAxis().count; }
  std::size_t cell(int stage, int state) const {
    return static_cast<std::size_t>(stage) * stateCount() + state;
  }
  ManifoldParams manifold() const {
    return ManifoldParams::apex(x_foot, apex_speed, omega_nominal);
  }
};

/// Constant acceleration consistent with two stage velocities over a
/// position increment dx.
double stageAcceleration(double xd_n, double xd_next, double dx);

/// Backward value iteration over sagittal-position stages.
/// Throws GridTooCoarse when every cell of some stage loses all
/// admissible transitions.
PolicyTable dpBuild(const DpParams& params, const StepSpec& step,
                    const BundleSpec& bundle, const RobotParams& robot);

/// Nearest-cell policy lookup. Throws OutOfGrid outside the grid.
ControlPair dpLookup(const PolicyTable& table, double x, double xd);

/// Boundary-layer saturation: the DP controls apply outside |sigma| > eps,
/// inside the layer the bundle-entry and reference controls are blended.
ControlPair saturatedControl(double sig, double eps, const ControlPair& u_dp,
                             const ControlPair& u_eps,
                             const ControlPair& u_ref);

/// Adjusted sagittal foot placement preserving the next apex speed.
/// Throws InfeasibleApex when the requested apex speed exceeds the
/// transition speed.
double replanFoot(double x_trans, double xd_trans, double xd_apex_next,
                  double omega);

/// One stage-wise rollout point under the stored policy.
struct StageRolloutPoint {
  double x;
  double xd;
  double sig;
  ControlPair u;
};

/// Follows the stored policy stage by stage from a quantized start cell.
/// Stops early when a transition leaves the state grid.
std::vector<StageRolloutPoint> policyRollout(const PolicyTable& table,
                                             double x, double xd);

/// Whether the policy rollout from (x, xd) reaches |sigma| <= epsilon at
/// or before the final stage.
bool cellRecoverable(const PolicyTable& table, const BundleSpec& bundle,
                     double x, double xd);

struct ControlRanges {
  double omega_min, omega_max;
  double tau_min, tau_max;
};

/// Membership bit-grid of the control-dependent recoverable region,
/// keyed by the policy-table grid. The query grid and control ranges
/// must match the table's. Throws GridMismatch otherwise.
struct RegionMap {
  GridAxis stages;
  GridAxis states;
  std::vector<bool> member;  ///< stage-major

  bool at(int stage, int state) const {
    return member[static_cast<std::size_t>(stage) * states.count + state];
  }
};

RegionMap estimateRecoverableRegion(const GridAxis& stages,
                                    const GridAxis& states,
                                    const ControlRanges& ranges,
                                    const BundleSpec& bundle,
                                    const PolicyTable& table);

/// Stage-indexed recovery control law with boundary-layer saturation.
/// Tracks the bundle-entry controls needed by the inner blend.
class RecoveryController {
public:
  RecoveryController(const PolicyTable& table, const BundleSpec& bundle,
                     const ControlPair& u_ref);

  /// Controls for the current sagittal state.
  ControlPair update(double x, double xd);

private:
  const PolicyTable* table_;
  BundleSpec bundle_;
  ControlPair u_ref_;
  ControlPair u_last_;
  std::optional<ControlPair> u_eps_;
};

/// Decision of the two-stage recovery procedure for a disturbed state.
struct RecoveryAction {
  enum class Kind { kContinuous, kReplanFoot };
  Kind kind = Kind::kContinuous;
  ControlPair controls;        ///< initial DP controls
  double new_x_foot = 0.0;     ///< predicted replanned contact (local) [m]
};

/// Continuous DP recovery when the disturbed state lies inside the
/// recoverable region; otherwise a foot re-plan for the next step with
/// its apex speed preserved.
RecoveryAction recover(const PhaseState& local_state, const StepPlan& plan,
                       const PolicyTable& table, const BundleSpec& bundle);

/// Time-domain closed-loop recovery rollout: RK4 sagittal integration
/// under the stage-indexed saturated policy, from (x0, xd0) until the
/// final stage position is reached.
struct RecoverySample {
  double t;
  double x;
  double xd;
  double sig;
  ControlPair u;
};
std::vector<RecoverySample> simulateRecovery(const PolicyTable& table,
                                             const BundleSpec& bundle,
                                             double x0, double xd0,
                                             double dt = 1e-3);

/// Deterministic hash of the build inputs, used as the cache key.
std::uint64_t dpBuildHash(const DpParams& params, const StepSpec& step,
                          const RobotParams& robot);

// Versioned JSON container for policy tables (with an optional region
// bit-grid). The loader rejects unknown format versions.
void savePolicyTable(const PolicyTable& table,
                     const std::optional<RegionMap>& region,
                     const std::string& path);
std::pair<PolicyTable, std::optional<RegionMap>> loadPolicyTable(
    const std::string& path);

}  // namespace phasewalk
