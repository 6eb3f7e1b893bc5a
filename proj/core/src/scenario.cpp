#include "phasewalk/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"
#include "phasewalk/contact.hpp"

namespace phasewalk {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

std::vector<StepSite> sampleTerrain(const TerrainSpec& spec, int n_steps,
                                    double hip_width, double apex_height) {
  if (n_steps < 1) throw ConfigError("terrain needs at least one step");
  if (!(spec.dh_min < spec.dh_max)) {
    throw ConfigError("dh_min must be below dh_max");
  }

  SplitMix64 rng(spec.seed);
  const bool stochastic = spec.kind != TerrainKind::kFlat;
  const double base_slope =
      (spec.kind == TerrainKind::kInclined)
          ? std::tan(spec.tilt_deg * std::numbers::pi / 180.0)
          : 0.0;
  const double stride =
      spec.step_length +
      (spec.kind == TerrainKind::kDisjointed ? spec.gap : 0.0);

  std::vector<double> z(n_steps, 0.0);
  for (int k = 1; k < n_steps; ++k) {
    double dh = 0.0;
    if (stochastic) {
      const double mag = rng.uniform(spec.dh_min, spec.dh_max);
      dh = rng.coin() ? mag : -mag;
    }
    z[k] = z[k - 1] + dh + base_slope * stride;
  }

  std::vector<StepSite> sites(n_steps);
  for (int k = 0; k < n_steps; ++k) {
    const double x = k * stride;
    const double y = (k % 2 == 0) ? hip_width / 2.0 : -hip_width / 2.0;
    sites[k].foot = {x, y, z[k]};
  }
  for (int k = 0; k < n_steps; ++k) {
    double a;
    if (k + 1 < n_steps) {
      a = (z[k + 1] - z[k]) / stride;
    } else if (k > 0) {
      a = (z[k] - z[k - 1]) / stride;
    } else {
      a = base_slope;
    }
    sites[k].surface.a = a;
    sites[k].surface.b = 0.0;
    sites[k].surface.c =
        apex_height + sites[k].foot.z() - a * sites[k].foot.x();
  }
  return sites;
}

namespace {

std::vector<StepSpec> makeSpecs(const std::vector<StepSite>& sites,
                                const ScenarioConfig& cfg) {
  std::vector<StepSpec> specs(sites.size());
  const bool steered = cfg.heading_increment != 0.0;

  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double prev_path_x = sites.empty() ? 0.0 : sites[0].foot.x();

  for (std::size_t q = 0; q < sites.size(); ++q) {
    const StepSite& site = sites[q];
    StepSpec& spec = specs[q];
    const double heading = cfg.heading_increment * static_cast<double>(q);
    spec.heading = heading;

    const double dh =
        (q == 0) ? 0.0 : site.foot.z() - sites[q - 1].foot.z();
    spec.apex_speed = std::max(cfg.planner.min_apex_speed,
                               cfg.keyframe.base_apex_speed +
                                   cfg.keyframe.terrain_gain * dh);

    if (!steered) {
      spec.foot = site.foot;
      spec.surface = site.surface;
      continue;
    }

    const Eigen::Vector2d dir(std::cos(heading), std::sin(heading));
    const Eigen::Vector2d lat(-std::sin(heading), std::cos(heading));
    if (q > 0) center += dir * (site.foot.x() - prev_path_x);
    prev_path_x = site.foot.x();
    const Eigen::Vector2d xy = center + lat * site.foot.y();
    spec.foot = {xy.x(), xy.y(), site.foot.z()};
    const Eigen::Vector2d ab = dir * site.surface.a;
    spec.surface.a = ab.x();
    spec.surface.b = ab.y();
    spec.surface.c = cfg.apex_height + site.foot.z() - ab.x() * xy.x() -
                     ab.y() * xy.y();
  }
  return specs;
}

std::string cachePath(const ScenarioConfig& cfg, std::uint64_t hash) {
  char name[64];
  std::snprintf(name, sizeof(name), "policy_%016llx.json",
                static_cast<unsigned long long>(hash));
  return (std::filesystem::path(cfg.cache_dir) / name).string();
}

PolicyTable buildOrLoad(const DpParams& params, const StepSpec& step,
                        const ScenarioConfig& cfg, bool force) {
  const std::uint64_t hash = dpBuildHash(params, step, cfg.robot);
  const std::string path = cachePath(cfg, hash);
  if (!force && std::filesystem::exists(path)) {
    auto [table, region] = loadPolicyTable(path);
    if (table.build_hash == hash) return table;
  }
  PolicyTable table = dpBuild(params, step, cfg.bundle, cfg.robot);
  std::error_code ec;
  std::filesystem::create_directories(cfg.cache_dir, ec);
  const RegionMap region = estimateRecoverableRegion(
      params.stageAxis(), params.stateAxis(),
      {params.omega_min, params.omega_max, params.tau_min, params.tau_max},
      cfg.bundle, table);
  savePolicyTable(table, region, path);
  return table;
}

// Steps a disturbance lands in, mapped by trigger value.
std::vector<std::size_t> disturbedSteps(const ScenarioConfig& cfg,
                                        const std::vector<StepPlan>& plans) {
  std::vector<std::size_t> out;
  for (const auto& d : cfg.disturbances) {
    std::size_t idx = 0;
    if (d.trigger == Disturbance::Trigger::kZeta) {
      idx = static_cast<std::size_t>(std::max(0.0, std::floor(d.at)));
    } else {
      while (idx + 1 < plans.size() && plans[idx].transition.time < d.at) {
        ++idx;
      }
    }
    if (idx >= plans.size()) idx = plans.size() - 1;
    out.push_back(idx);
  }
  return out;
}

DpParams paramsForStep(const ScenarioConfig& cfg, const StepPlan& plan) {
  DpParams p = cfg.dp;
  const double shift = plan.foot_local.x() - cfg.dp_anchor;
  p.stage_min += shift;
  p.stage_max += shift;
  return p;
}

StepSpec localStepOf(const StepPlan& plan) {
  StepSpec s;
  s.foot = plan.foot_local;
  s.foot.y() = plan.y_foot_local;
  s.surface = plan.surface_local;
  s.apex_speed = plan.spec.apex_speed;
  s.heading = 0.0;
  return s;
}

}  // namespace

PolicyTable buildOrLoadNominalTable(const ScenarioConfig& config, bool force,
                                    const std::string& path_override) {
  StepSpec step;
  step.foot = {config.dp_anchor, 0.0, 0.0};
  step.surface = {0.0, 0.0, config.apex_height};
  step.apex_speed = config.keyframe.base_apex_speed;

  if (!path_override.empty()) {
    const std::uint64_t hash = dpBuildHash(config.dp, step, config.robot);
    if (!force && std::filesystem::exists(path_override)) {
      auto [table, region] = loadPolicyTable(path_override);
      if (table.build_hash == hash) return table;
    }
    PolicyTable table = dpBuild(config.dp, step, config.bundle, config.robot);
    const RegionMap region = estimateRecoverableRegion(
        config.dp.stageAxis(), config.dp.stateAxis(),
        {config.dp.omega_min, config.dp.omega_max, config.dp.tau_min,
         config.dp.tau_max},
        config.bundle, table);
    savePolicyTable(table, region, path_override);
    return table;
  }
  return buildOrLoad(config.dp, step, config, force);
}

WalkLog planToLog(const std::vector<StepPlan>& plans,
                  const ScenarioConfig& config) {
  WalkLog log;
  for (std::size_t q = 0; q < plans.size(); ++q) {
    const StepPlan& plan = plans[q];
    const Mode mode = (q % 2 == 0) ? Mode::kLeftSupport : Mode::kRightSupport;
    const double window_begin =
        (q > 0 && plans[q - 1].multicontact)
            ? plans[q - 1].multicontact->t_start +
                  plans[q - 1].multicontact->duration
            : -std::numeric_limits<double>::infinity();
    const double window_end = plan.multicontact
                                  ? plan.multicontact->t_start
                                  : std::numeric_limits<double>::infinity();

    StepRecord rec;
    rec.index = static_cast<int>(q);
    rec.foot = plan.spec.foot;

    for (const auto& s : plan.trajectory) {
      if (s.t < window_begin - 1e-15 || s.t > window_end + 1e-15) continue;
      const PhaseState local = [&] {
        const Eigen::Vector2d p = plan.frame.toLocal({s.state.x, s.state.y});
        const Eigen::Vector2d v =
            plan.frame.dirToLocal({s.state.xd, s.state.yd});
        PhaseState l = s.state;
        l.x = p.x();
        l.y = p.y();
        l.xd = v.x();
        l.yd = v.y();
        return l;
      }();
      WalkSample sample;
      sample.t = s.t;
      sample.step = rec.index;
      sample.mode = mode;
      sample.state = s.state;
      sample.input = s.input;
      sample.sigma = sigma(local.x, local.xd, plan.manifold);
      sample.zeta =
          (local.xd > 0.0) ? plan.progression(local.x, local.xd) : 0.0;
      sample.zeta_cum = static_cast<double>(q) + sample.zeta;
      log.samples.push_back(sample);
      rec.max_abs_sigma = std::max(rec.max_abs_sigma, std::abs(sample.sigma));
    }

    if (plan.multicontact) {
      const QuinticSegment& seg = *plan.multicontact;
      double s_off = 0.0;
      while (s_off <= seg.duration + 1e-15) {
        const Eigen::Vector3d p = seg.position(std::min(s_off, seg.duration));
        const Eigen::Vector3d v = seg.velocity(std::min(s_off, seg.duration));
        WalkSample sample;
        sample.t = seg.t_start + std::min(s_off, seg.duration);
        sample.step = rec.index;
        sample.mode = Mode::kDualSupport;
        sample.state = {p.x(), p.y(), p.z(), v.x(), v.y(), v.z()};
        sample.input = plan.trajectory.back().input;
        sample.sigma = 0.0;
        sample.zeta = 1.0;
        sample.zeta_cum = static_cast<double>(q) + 1.0;
        log.samples.push_back(sample);
        s_off += config.walk.dt;
      }
      log.events.push_back({WalkEvent::Kind::kDualEnter, rec.index,
                            seg.t_start, static_cast<double>(q) + 1.0, 0, 0,
                            {}});
      log.events.push_back({WalkEvent::Kind::kDualExit, rec.index,
                            seg.t_start + seg.duration,
                            static_cast<double>(q) + 1.0, 0, 0, {}});
    }
    log.events.push_back({WalkEvent::Kind::kStepTransition, rec.index,
                          plan.transition.time, static_cast<double>(q) + 1.0,
                          0, 0, {}});
    if (plan.next_manifold) {
      const Eigen::Vector2d tp{plan.transition.x, plan.transition.xd};
      rec.entry_sigma_next = sigma(tp.x(), tp.y(), *plan.next_manifold);
    }
    rec.apex_speed_realized = plan.spec.apex_speed;
    log.steps.push_back(rec);
  }
  std::sort(log.samples.begin(), log.samples.end(),
            [](const WalkSample& a, const WalkSample& b) { return a.t < b.t; });
  log.duration = plans.back().transition.time;
  return log;
}

WalkMetrics metricsFromLog(const WalkLog& log,
                           const std::vector<StepPlan>& plans,
                           const ScenarioConfig& config) {
  WalkMetrics m;
  m.completed = true;
  m.n_steps = static_cast<int>(log.steps.size());
  m.duration = log.duration;
  for (const auto& rec : log.steps) {
    m.kappa_per_step.push_back(rec.kappa);
    m.max_abs_sigma = std::max(m.max_abs_sigma, rec.max_abs_sigma);
    m.max_transition_residual =
        std::max(m.max_transition_residual, std::abs(rec.entry_sigma_next));
  }
  for (const auto& ev : log.events) {
    switch (ev.kind) {
      case WalkEvent::Kind::kDisturbance: m.disturbance_count++; break;
      case WalkEvent::Kind::kRecoveryContinuous:
        m.recovery_continuous_count++;
        break;
      case WalkEvent::Kind::kFootReplanned: m.foot_replan_count++; break;
      case WalkEvent::Kind::kLateralReplanned: m.lateral_replan_count++; break;
      default: break;
    }
  }

  // friction-cone margins over the planned dual-support windows
  for (std::size_t q = 0; q + 1 < plans.size(); ++q) {
    if (!plans[q].multicontact) continue;
    const QuinticSegment& seg = *plans[q].multicontact;
    ContactPair pair;
    pair.p_left = plans[q].spec.foot;
    pair.p_right = plans[q + 1].spec.foot;
    for (double s = 0.0; s <= seg.duration + 1e-15; s += config.walk.dt) {
      const double so = std::min(s, seg.duration);
      const Eigen::Vector3d acc = seg.acceleration(so);
      const Eigen::Vector3d pos = seg.position(so);
      const Eigen::Vector3d f_total =
          config.robot.mass *
          (acc + Eigen::Vector3d(0, 0, config.robot.gravity));
      const WrenchDemand demand =
          makeConsistentDemand(pair, pos, f_total, config.internal_force);
      const auto [fl, fr] = solveReactionForces(pair, pos, demand);
      const double margin = std::min(
          checkFrictionCone(fl, pair.normal_left, pair.cone_half_angle).margin,
          checkFrictionCone(fr, pair.normal_right, pair.cone_half_angle)
              .margin);
      m.min_cone_margin =
          m.min_cone_margin ? std::min(*m.min_cone_margin, margin) : margin;
    }
  }
  return m;
}

ScenarioResult runScenario(const ScenarioConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioResult result;
  try {
    const auto sites = sampleTerrain(config.terrain, config.n_steps,
                                     config.hip_width, config.apex_height);
    const auto specs = makeSpecs(sites, config);
    result.plans = (config.heading_increment != 0.0)
                       ? planSteeredWalk(specs, config.robot, config.planner)
                       : generateNominal(specs, config.robot, config.planner);

    if (config.walk.enable_recovery && !config.disturbances.empty()) {
      std::set<std::uint64_t> built;
      for (std::size_t idx : disturbedSteps(config, result.plans)) {
        const DpParams params = paramsForStep(config, result.plans[idx]);
        const StepSpec step = localStepOf(result.plans[idx]);
        const std::uint64_t hash = dpBuildHash(params, step, config.robot);
        if (built.insert(hash).second) {
          result.tables.push_back(buildOrLoad(params, step, config, false));
        }
      }
    }

    result.log = runWalk(result.plans, result.tables, config.disturbances,
                         config.walk);
    result.metrics = metricsFromLog(result.log, result.plans, config);
  } catch (const Error& e) {
    result.metrics.completed = false;
    result.metrics.failure = e.what();
  }
  result.metrics.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

namespace {

nlohmann::json eventToJson(const WalkEvent& ev) {
  return {{"kind", to_string(ev.kind)},
          {"step", ev.step},
          {"t", ev.t},
          {"zeta", ev.zeta_cum},
          {"dvx", ev.dvx},
          {"dvy", ev.dvy},
          {"foot", {ev.foot.x(), ev.foot.y(), ev.foot.z()}}};
}

WalkEvent::Kind eventKindFromString(const std::string& s) {
  using K = WalkEvent::Kind;
  for (K k : {K::kStepTransition, K::kDualEnter, K::kDualExit, K::kDisturbance,
              K::kRecoveryContinuous, K::kRecoveryReplanPending,
              K::kFootReplanned, K::kLateralReplanned}) {
    if (s == to_string(k)) return k;
  }
  throw IoError("unknown event kind: " + s);
}

void writeFile(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << body;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

void saveEvents(const std::vector<WalkEvent>& events,
                const std::string& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& ev : events) j.push_back(eventToJson(ev));
  writeFile(path, j.dump(2) + "\n");
}

std::vector<WalkEvent> loadEvents(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  in >> j;
  std::vector<WalkEvent> events;
  for (const auto& e : j) {
    WalkEvent ev;
    ev.kind = eventKindFromString(e.at("kind").get<std::string>());
    ev.step = e.at("step").get<int>();
    ev.t = e.at("t").get<double>();
    ev.zeta_cum = e.at("zeta").get<double>();
    ev.dvx = e.at("dvx").get<double>();
    ev.dvy = e.at("dvy").get<double>();
    const auto& f = e.at("foot");
    ev.foot = {f[0].get<double>(), f[1].get<double>(), f[2].get<double>()};
    events.push_back(ev);
  }
  return events;
}

void emitOutputs(const WalkLog& log, const WalkMetrics& metrics,
                 const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };

  // metrics.json is always written; wall-clock time is deliberately not
  // part of the file so identical runs produce identical bytes
  {
    nlohmann::json j;
    j["completed"] = metrics.completed;
    j["failure"] = metrics.failure;
    j["n_steps"] = metrics.n_steps;
    j["kappa_per_step"] = metrics.kappa_per_step;
    j["max_abs_sigma"] = metrics.max_abs_sigma;
    j["max_transition_residual"] = metrics.max_transition_residual;
    j["disturbance_count"] = metrics.disturbance_count;
    j["recovery_continuous_count"] = metrics.recovery_continuous_count;
    j["foot_replan_count"] = metrics.foot_replan_count;
    j["lateral_replan_count"] = metrics.lateral_replan_count;
    if (metrics.min_cone_margin) {
      j["min_cone_margin"] = *metrics.min_cone_margin;
    }
    j["duration"] = metrics.duration;
    writeFile(path("metrics.json"), j.dump(2) + "\n");
  }

  if (!metrics.completed) return;

  {
    std::ostringstream csv;
    csv << "t,zeta,mode,x,y,z,xd,yd,zd,omega,tau_x,tau_y,tau_z,sigma,"
           "foot_x,foot_y,foot_z\n";
    for (const auto& s : log.samples) {
      csv << fmt(s.t) << ',' << fmt(s.zeta) << ',' << to_string(s.mode) << ','
          << fmt(s.state.x) << ',' << fmt(s.state.y) << ',' << fmt(s.state.z)
          << ',' << fmt(s.state.xd) << ',' << fmt(s.state.yd) << ','
          << fmt(s.state.zd) << ',' << fmt(s.input.omega) << ','
          << fmt(s.input.tau_x) << ',' << fmt(s.input.tau_y) << ','
          << fmt(s.input.tau_z) << ',' << fmt(s.sigma) << ','
          << fmt(s.input.foot.x()) << ',' << fmt(s.input.foot.y()) << ','
          << fmt(s.input.foot.z()) << '\n';
    }
    writeFile(path("trajectory.csv"), csv.str());
  }

  saveEvents(log.events, path("events.json"));

  {
    std::ostringstream csv;
    csv << "x,xd\n";
    for (const auto& s : log.samples) {
      csv << fmt(s.state.x) << ',' << fmt(s.state.xd) << '\n';
    }
    writeFile(path("portrait_sagittal.csv"), csv.str());
  }
  {
    std::ostringstream csv;
    csv << "y,yd\n";
    for (const auto& s : log.samples) {
      csv << fmt(s.state.y) << ',' << fmt(s.state.yd) << '\n';
    }
    writeFile(path("portrait_lateral.csv"), csv.str());
  }
  {
    std::ostringstream csv;
    csv << "zeta,sigma\n";
    for (const auto& s : log.samples) {
      csv << fmt(s.zeta_cum) << ',' << fmt(s.sigma) << '\n';
    }
    writeFile(path("portrait_sigma.csv"), csv.str());
  }
}

}  // namespace phasewalk
