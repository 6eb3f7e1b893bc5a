#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "phasewalk/manifold.hpp"
#include "phasewalk/pipm.hpp"
#include "phasewalk/planner.hpp"
#include "phasewalk/recovery.hpp"

namespace phasewalk {

enum class Mode { kLeftSupport, kRightSupport, kDualSupport };
const char* to_string(Mode m);

/// Progression variable, discrete mode and continuous state. The
/// continuous state is expressed in the current step's walking frame.
struct HybridState {
  double zeta = 0.0;
  Mode mode = Mode::kLeftSupport;
  PhaseState state;
};

enum class GuardKind { kPosition, kVelocity, kProgression, kManifold };
GuardKind guardKindFromString(const std::string& s);
const char* to_string(GuardKind k);

struct Guard {
  GuardKind kind = GuardKind::kManifold;
  double threshold = 0.0;
  int direction = +1;  ///< +1 rising crossing, -1 falling
};

/// Whether the state satisfies the guard condition in its crossing
/// direction. The manifold guard evaluates the next step's deviation
/// against the threshold (conventionally -epsilon).
bool evalGuard(const Guard& guard, const HybridState& h,
               const ManifoldParams& next_manifold);

struct TransitionEvent {
  enum class Type { kAutonomous, kControlled, kTimed, kDisturbed };
  enum class Effect { kSwitching, kJump };

  Type type = Type::kAutonomous;
  Effect effect = Effect::kSwitching;
  Mode target = Mode::kLeftSupport;  ///< switching target
  Eigen::Vector2d velocity_jump = Eigen::Vector2d::Zero();  ///< jump payload
};

/// Applies a transition to the hybrid state. Switching moves along a
/// mode-graph edge (single<->dual; direct single<->single only when
/// `allow_direct_swap` reflects a zero-length dual phase) and re-anchors
/// zeta; jumps add the velocity impulse and keep the mode. Throws
/// IllegalEdge for transitions outside the graph.
HybridState applyTransition(const HybridState& h, const TransitionEvent& ev,
                            bool allow_direct_swap = false);

struct Disturbance {
  enum class Trigger { kZeta, kTime };
  Trigger trigger = Trigger::kZeta;
  double at = 0.0;  ///< cumulative progression or global time
  double dvx = 0.0;
  double dvy = 0.0;
};
using DisturbanceSchedule = std::vector<Disturbance>;

struct WalkConfig {
  double dt = 1e-3;
  BundleSpec bundle;
  GuardKind guard_kind = GuardKind::kManifold;
  bool enable_recovery = true;
  bool enable_multicontact = true;
  /// sigma jump treated as a disturbance when it exceeds this multiple
  /// of the per-sample conservation tolerance
  double sigma_jump_factor = 10.0;
  double sigma_conservation_tol = 1e-9;
  std::size_t max_samples_per_step = 200'000;
};

struct WalkSample {
  double t = 0.0;
  double zeta = 0.0;      ///< per-step progression
  double zeta_cum = 0.0;  ///< step index + per-step progression
  int step = 0;
  Mode mode = Mode::kLeftSupport;
  PhaseState state;       ///< global frame
  ControlInput input;     ///< omega/torques, global foot
  double sigma = 0.0;     ///< vs the active step's manifold
};

struct WalkEvent {
  enum class Kind {
    kStepTransition,
    kDualEnter,
    kDualExit,
    kDisturbance,
    kRecoveryContinuous,
    kRecoveryReplanPending,
    kFootReplanned,
    kLateralReplanned,
  };
  Kind kind;
  int step = 0;
  double t = 0.0;
  double zeta_cum = 0.0;
  double dvx = 0.0, dvy = 0.0;     ///< disturbance payload
  Eigen::Vector3d foot = Eigen::Vector3d::Zero();  ///< replan payload
};
const char* to_string(WalkEvent::Kind k);

struct StepRecord {
  int index = 0;
  double kappa = 0.0;
  double max_abs_sigma = 0.0;
  double entry_sigma_next = 0.0;  ///< next-step deviation at the transition
  double apex_speed_realized = 0.0;
  Eigen::Vector3d foot = Eigen::Vector3d::Zero();  ///< realized, global
  int disturbance_count = 0;
  bool recovered_continuous = false;
  bool foot_replanned = false;
  bool lateral_replanned = false;
};

struct WalkLog {
  std::vector<WalkSample> samples;
  std::vector<WalkEvent> events;
  std::vector<StepRecord> steps;
  double duration = 0.0;
};

/// Executes the closed-loop hybrid walk over the planned steps:
/// integrate, watch the disturbance schedule, recover via the policy
/// tables (continuous control and/or foot re-planning), fire the step
/// guard, transition, repeat. Throws WalkFailed with the step index and
/// cause on unrecoverable situations.
WalkLog runWalk(const std::vector<StepPlan>& plans,
                std::span<const PolicyTable> tables,
                const DisturbanceSchedule& disturbances,
                const WalkConfig& config);

}  // namespace phasewalk
