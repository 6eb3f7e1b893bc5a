#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phasewalk/automaton.hpp"
#include "phasewalk/planner.hpp"
#include "phasewalk/recovery.hpp"

namespace phasewalk {

/// SplitMix64 stream; the fixed algorithm keeps sampled terrains
/// portable across platforms and toolchains.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }
  bool coin() { return (next() & 1ull) != 0; }

private:
  std::uint64_t state_;
};

enum class TerrainKind { kFlat, kStochasticStairs, kInclined, kDisjointed };
TerrainKind terrainKindFromString(const std::string& s);
const char* to_string(TerrainKind k);

struct TerrainSpec {
  TerrainKind kind = TerrainKind::kFlat;
  double dh_min = 0.1;      ///< [m]
  double dh_max = 0.3;      ///< [m]
  double tilt_deg = 0.0;    ///< base slope of the inclined kind
  double step_length = 0.5; ///< [m]
  double gap = 0.2;         ///< extra spacing of the disjointed kind [m]
  std::uint64_t seed = 1;
};

/// One sampled contact site with its conforming CoM plane.
struct StepSite {
  Eigen::Vector3d foot = Eigen::Vector3d::Zero();  ///< x, y guess, z
  ComSurface surface;
};

/// Stair heights with |dh| uniform in [dh_min, dh_max] and random sign;
/// CoM planes parallel to the local terrain slope, biased to keep the
/// apex height at `apex_height`. Deterministic under the spec seed.
std::vector<StepSite> sampleTerrain(const TerrainSpec& spec, int n_steps,
                                    double hip_width, double apex_height);

struct KeyframeHeuristic {
  double base_apex_speed = 0.6;  ///< [m/s]
  double terrain_gain = 0.0;     ///< apex = base + gain * dh
};

struct ScenarioConfig {
  int config_version = 1;
  TerrainSpec terrain;
  int n_steps = 10;
  double hip_width = 0.56;       ///< [m]
  double apex_height = 1.0;      ///< target CoM clearance [m]
  KeyframeHeuristic keyframe;
  double heading_increment = 0.0;  ///< per-step heading [rad]
  RobotParams robot;
  DpParams dp;
  double dp_anchor = 1.2;  ///< contact position the stage range refers to
  BundleSpec bundle;
  DisturbanceSchedule disturbances;
  PlannerConfig planner;
  WalkConfig walk;
  double internal_force = 0.0;   ///< multi-contact tension [N]
  double replan_demo_dv_small = 0.1;
  double replan_demo_dv_large = 0.4;
  std::optional<std::pair<double, double>> s_initial;  ///< disturbed state
  std::string cache_dir = "";
  std::string out_dir = "out";
};

/// Key/value configuration file; Table-4.1 parameter names are accepted
/// in their ASCII spelling. Throws ConfigError on unknown keys or
/// malformed values.
ScenarioConfig loadConfig(const std::string& path);

struct WalkMetrics {
  bool completed = false;
  std::string failure;
  int n_steps = 0;
  std::vector<double> kappa_per_step;
  double max_abs_sigma = 0.0;
  double max_transition_residual = 0.0;
  int disturbance_count = 0;
  int recovery_continuous_count = 0;
  int foot_replan_count = 0;
  int lateral_replan_count = 0;
  std::optional<double> min_cone_margin;  ///< over dual-support samples [rad]
  double duration = 0.0;                  ///< simulated walk time [s]
  double wall_clock_seconds = 0.0;
};

struct ScenarioResult {
  std::vector<StepPlan> plans;
  std::vector<PolicyTable> tables;
  WalkLog log;
  WalkMetrics metrics;
};

/// Full pipeline: terrain, keyframes, nominal/steered plan, policy
/// tables (cached), closed-loop walk, metrics. Planner or executor
/// failures are reported in the metrics rather than thrown.
ScenarioResult runScenario(const ScenarioConfig& config);

/// Policy table for the scenario's reference step (contact at the stage
/// anchor, flat plane at the apex height, base apex speed), loaded from
/// the cache when a matching build exists.
PolicyTable buildOrLoadNominalTable(const ScenarioConfig& config, bool force,
                                    const std::string& path_override = "");

/// Nominal-plan log: the planned trajectories replayed sample by sample
/// (single support plus dual windows), without executing the automaton.
WalkLog planToLog(const std::vector<StepPlan>& plans,
                  const ScenarioConfig& config);

WalkMetrics metricsFromLog(const WalkLog& log,
                           const std::vector<StepPlan>& plans,
                           const ScenarioConfig& config);

/// Writes trajectory.csv, events.json, metrics.json and the
/// phase-portrait CSVs into `out_dir`. On failed runs only metrics.json
/// is produced.
void emitOutputs(const WalkLog& log, const WalkMetrics& metrics,
                 const std::string& out_dir);

/// events.json round trip.
void saveEvents(const std::vector<WalkEvent>& events, const std::string& path);
std::vector<WalkEvent> loadEvents(const std::string& path);

}  // namespace phasewalk
