#include "phasewalk/automaton.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace phasewalk {

const char* to_string(Mode m) {
  switch (m) {
    case Mode::kLeftSupport: return "left";
    case Mode::kRightSupport: return "right";
    case Mode::kDualSupport: return "dual";
  }
  return "unknown";
}

const char* to_string(GuardKind k) {
  switch (k) {
    case GuardKind::kPosition: return "position";
    case GuardKind::kVelocity: return "velocity";
    case GuardKind::kProgression: return "progression";
    case GuardKind::kManifold: return "manifold";
  }
  return "unknown";
}

GuardKind guardKindFromString(const std::string& s) {
  if (s == "position") return GuardKind::kPosition;
  if (s == "velocity") return GuardKind::kVelocity;
  if (s == "progression") return GuardKind::kProgression;
  if (s == "manifold") return GuardKind::kManifold;
  throw ConfigError("unknown guard kind: " + s);
}

const char* to_string(WalkEvent::Kind k) {
  switch (k) {
    case WalkEvent::Kind::kStepTransition: return "step-transition";
    case WalkEvent::Kind::kDualEnter: return "dual-enter";
    case WalkEvent::Kind::kDualExit: return "dual-exit";
    case WalkEvent::Kind::kDisturbance: return "disturbance";
    case WalkEvent::Kind::kRecoveryContinuous: return "recovery-continuous";
    case WalkEvent::Kind::kRecoveryReplanPending:
      return "recovery-replan-pending";
    case WalkEvent::Kind::kFootReplanned: return "foot-replanned";
    case WalkEvent::Kind::kLateralReplanned: return "lateral-replanned";
  }
  return "unknown";
}

bool evalGuard(const Guard& guard, const HybridState& h,
               const ManifoldParams& next_manifold) {
  switch (guard.kind) {
    case GuardKind::kPosition:
      return guard.direction > 0
                 ? (h.state.x >= guard.threshold && h.state.xd > 0.0)
                 : (h.state.x <= guard.threshold && h.state.xd < 0.0);
    case GuardKind::kVelocity:
      return guard.direction > 0 ? h.state.xd >= guard.threshold
                                 : h.state.xd <= guard.threshold;
    case GuardKind::kProgression:
      return guard.direction > 0 ? h.zeta >= guard.threshold
                                 : h.zeta <= guard.threshold;
    case GuardKind::kManifold: {
      const double s = sigma(h.state.x, h.state.xd, next_manifold);
      return guard.direction > 0 ? s >= guard.threshold : s <= guard.threshold;
    }
  }
  return false;
}

namespace {

bool isSingle(Mode m) {
  return m == Mode::kLeftSupport || m == Mode::kRightSupport;
}

}  // namespace

HybridState applyTransition(const HybridState& h, const TransitionEvent& ev,
                            bool allow_direct_swap) {
  HybridState out = h;
  if (ev.effect == TransitionEvent::Effect::kJump) {
    out.state.xd += ev.velocity_jump.x();
    out.state.yd += ev.velocity_jump.y();
    return out;
  }

  const Mode from = h.mode;
  const Mode to = ev.target;
  const bool legal =
      (isSingle(from) && to == Mode::kDualSupport) ||
      (from == Mode::kDualSupport && isSingle(to)) ||
      (isSingle(from) && isSingle(to) && from != to && allow_direct_swap);
  if (!legal) {
    std::ostringstream msg;
    msg << "illegal mode transition " << to_string(from) << " -> "
        << to_string(to);
    throw IllegalEdge(msg.str());
  }
  out.mode = to;
  out.zeta = 0.0;
  return out;
}

namespace {

// Per-step planning data the executor can revise online.
struct StepRuntime {
  StepFrame frame;
  ComSurface surface;
  Eigen::Vector3d foot;  // local, y already at the searched placement
  double omega = 0.0;
  double apex_speed = 0.0;
  ManifoldParams manifold;
  std::optional<ManifoldParams> next_manifold;
  double next_apex = 0.0;
  StepProgression progression;
  double x_trans = 0.0;
  double xd_trans = 0.0;
  double t_apex_local = 0.0;
};

struct TableMatch {
  const PolicyTable* table = nullptr;
  double shift = 0.0;  // table query position = x - shift
};

TableMatch findTable(std::span<const PolicyTable> tables,
                     const StepRuntime& rt, const RobotParams& robot) {
  for (const auto& t : tables) {
    if (std::abs(t.omega_nominal - rt.omega) > 1e-9) continue;
    if (std::abs(t.apex_speed - rt.apex_speed) > 1e-9) continue;
    if (std::abs(t.mass - robot.mass) > 1e-12) continue;
    if (std::abs(t.gravity - robot.gravity) > 1e-12) continue;
    return {&t, rt.foot.x() - t.x_foot};
  }
  return {};
}

Eigen::Vector3d footToGlobal(const StepRuntime& rt) {
  const Eigen::Vector2d g = rt.frame.toGlobal({rt.foot.x(), rt.foot.y()});
  return {g.x(), g.y(), rt.foot.z()};
}

PhaseState toGlobalState(const PhaseState& l, const StepFrame& f) {
  const Eigen::Vector2d p = f.toGlobal({l.x, l.y});
  const Eigen::Vector2d v = f.dirToGlobal({l.xd, l.yd});
  PhaseState g = l;
  g.x = p.x();
  g.y = p.y();
  g.xd = v.x();
  g.yd = v.y();
  return g;
}

PhaseState toLocalState(const PhaseState& g, const StepFrame& f) {
  const Eigen::Vector2d p = f.toLocal({g.x, g.y});
  const Eigen::Vector2d v = f.dirToLocal({g.xd, g.yd});
  PhaseState l = g;
  l.x = p.x();
  l.y = p.y();
  l.xd = v.x();
  l.yd = v.y();
  return l;
}

PhaseState scaled(const PhaseState& s, const PhaseState& d, double h) {
  PhaseState out;
  out.x = s.x + h * d.x;
  out.y = s.y + h * d.y;
  out.z = s.z + h * d.z;
  out.xd = s.xd + h * d.xd;
  out.yd = s.yd + h * d.yd;
  out.zd = s.zd + h * d.zd;
  return out;
}

void rk4Local(PhaseState& s, const ControlInput& u, const ComSurface& surf,
              const RobotParams& robot, double h) {
  if (h <= 0.0) return;
  const auto f = [&](const PhaseState& x) {
    return pipmDerivative(x, u, surf, robot, OmegaMode::kFree);
  };
  const PhaseState k1 = f(s);
  const PhaseState k2 = f(scaled(s, k1, h / 2));
  const PhaseState k3 = f(scaled(s, k2, h / 2));
  const PhaseState k4 = f(scaled(s, k3, h));
  PhaseState out = s;
  out.x += h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
  out.y += h / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y);
  out.z += h / 6 * (k1.z + 2 * k2.z + 2 * k3.z + k4.z);
  out.xd += h / 6 * (k1.xd + 2 * k2.xd + 2 * k3.xd + k4.xd);
  out.yd += h / 6 * (k1.yd + 2 * k2.yd + 2 * k3.yd + k4.yd);
  out.zd += h / 6 * (k1.zd + 2 * k2.zd + 2 * k3.zd + k4.zd);
  s = out;
}

[[noreturn]] void fail(int step, const std::string& cause) {
  std::ostringstream msg;
  msg << "step " << step << ": " << cause;
  throw WalkFailed(msg.str());
}

}  // namespace

WalkLog runWalk(const std::vector<StepPlan>& plans,
                std::span<const PolicyTable> tables,
                const DisturbanceSchedule& disturbances,
                const WalkConfig& config) {
  if (plans.empty()) throw WalkFailed("step 0: no steps to execute");
  for (std::size_t i = 1; i < disturbances.size(); ++i) {
    if (disturbances[i].at < disturbances[i - 1].at) {
      throw ConfigError("disturbance schedule must be sorted");
    }
  }

  RobotParams robot;
  if (!tables.empty()) {
    robot.mass = tables[0].mass;
    robot.gravity = tables[0].gravity;
  }

  WalkLog log;
  const double dt = config.dt;
  const double eps = config.bundle.epsilon;
  const std::size_t n_steps = plans.size();

  double t = 0.0;
  std::size_t dist_idx = 0;
  PhaseState global_state = plans.front().trajectory.front().state;
  std::optional<double> replanned_foot_x;  // in the incoming step's frame
  bool lateral_pending = false;

  for (std::size_t q = 0; q < n_steps; ++q) {
    const StepPlan& plan = plans[q];
    const bool last_step = (q + 1 == n_steps);
    StepRecord rec;
    rec.index = static_cast<int>(q);

    StepRuntime rt;
    rt.frame = plan.frame;
    rt.surface = plan.surface_local;
    rt.foot = plan.foot_local;
    rt.foot.y() = plan.y_foot_local;
    rt.omega = plan.omega;
    rt.apex_speed = plan.spec.apex_speed;
    rt.manifold = plan.manifold;
    rt.next_manifold = plan.next_manifold;
    rt.next_apex = plan.next_apex_speed;
    rt.progression = plan.progression;
    rt.x_trans = plan.transition.x;
    rt.xd_trans = plan.transition.xd;
    rt.t_apex_local = plan.apex_time - plan.entry_time;

    PhaseState local = toLocalState(global_state, rt.frame);
    if (!(local.xd > 0.0)) fail(rec.index, "entry state is not moving forward");

    bool foot_replanned = false;
    if (replanned_foot_x) {
      rt.foot.x() = *replanned_foot_x;
      rt.omega = omegaFromSurface(rt.surface, rt.foot, robot);
      rt.manifold = ManifoldParams::apex(rt.foot.x(), rt.apex_speed, rt.omega);
      foot_replanned = true;
      rec.foot_replanned = true;
      replanned_foot_x.reset();
    }

    const double entry_dev =
        std::max({std::abs(local.x - plan.entry_local.x),
                  std::abs(local.xd - plan.entry_local.xd),
                  std::abs(local.y - plan.entry_local.y),
                  std::abs(local.yd - plan.entry_local.yd)});
    if (foot_replanned || entry_dev > 1e-6) {
      const double ratio = -rt.omega * (local.x - rt.foot.x()) / local.xd;
      if (!(ratio > 0.0 && ratio < 1.0)) {
        fail(rec.index, "entry state cannot reach the step apex");
      }
      rt.t_apex_local = std::atanh(ratio) / rt.omega;

      if (rt.next_manifold) {
        try {
          const ManifoldParams flow{local.x, local.xd, rt.foot.x(), rt.omega};
          const TransitionPoint tp =
              findStepTransition(flow, *rt.next_manifold);
          rt.x_trans = tp.x;
          rt.xd_trans = tp.xd;
        } catch (const TransitionNotFound&) {
          // keep the nominal transition; the guard still ends the step
        }
      }
      try {
        rt.progression = StepProgression(rt.manifold, local.x, local.xd,
                                         rt.x_trans, rt.xd_trans);
      } catch (const DomainError&) {
        rt.progression = plan.progression;
      }

      const bool search_lateral =
          lateral_pending || foot_replanned ||
          std::abs(local.y - plan.entry_local.y) > 1e-6 ||
          std::abs(local.yd - plan.entry_local.yd) > 1e-6;
      if (search_lateral && rt.t_apex_local > 0.0) {
        try {
          rt.foot.y() = searchLateralFoot(local.y, local.yd, rt.omega,
                                          rt.t_apex_local, rt.foot.y() - 0.6,
                                          rt.foot.y() + 0.6, 1e-4, 30, dt);
        } catch (const Error& e) {
          fail(rec.index, std::string("lateral re-plan failed: ") + e.what());
        }
        if (lateral_pending || foot_replanned) {
          rec.lateral_replanned = true;
          log.events.push_back({WalkEvent::Kind::kLateralReplanned, rec.index,
                                t, static_cast<double>(q), 0.0, 0.0,
                                footToGlobal(rt)});
        }
      }
    }
    lateral_pending = false;
    if (foot_replanned) {
      log.events.push_back({WalkEvent::Kind::kFootReplanned, rec.index, t,
                            static_cast<double>(q), 0.0, 0.0,
                            footToGlobal(rt)});
    }
    rec.foot = footToGlobal(rt);

    Mode mode = (q % 2 == 0) ? Mode::kLeftSupport : Mode::kRightSupport;
    const Mode next_mode =
        ((q + 1) % 2 == 0) ? Mode::kLeftSupport : Mode::kRightSupport;

    Guard guard;
    if (last_step || !rt.next_manifold) {
      guard = {GuardKind::kPosition, rt.x_trans, +1};
    } else {
      switch (config.guard_kind) {
        case GuardKind::kPosition:
          guard = {GuardKind::kPosition, rt.x_trans, +1};
          break;
        case GuardKind::kVelocity:
          guard = {GuardKind::kVelocity, rt.xd_trans, +1};
          break;
        case GuardKind::kProgression:
          guard = {GuardKind::kProgression, 1.0, +1};
          break;
        case GuardKind::kManifold:
          guard = {GuardKind::kManifold, -eps, +1};
          break;
      }
    }

    std::optional<RecoveryController> controller;
    TableMatch match;
    bool replan_pending = false;
    double zeta = 0.0;
    double sigma_prev = 0.0;
    double zeta_d = -1.0;
    std::vector<ZetaSigmaSample> kappa_samples;
    double prev_x = local.x;
    double prev_xd = local.xd;
    bool transitioned = false;
    const bool dual_available =
        config.enable_multicontact && plan.multicontact.has_value() &&
        !last_step;
    bool dual_skipped = true;

    auto engageRecovery = [&](const PhaseState& s) {
      match = findTable(tables, rt, robot);
      if (!match.table) {
        fail(rec.index, "no policy table compatible with this step");
      }
      controller.emplace(*match.table, config.bundle,
                         ControlPair{rt.omega, 0.0});
      const bool recoverable = cellRecoverable(*match.table, config.bundle,
                                               s.x - match.shift, s.xd);
      if (recoverable || last_step || !rt.next_manifold) {
        rec.recovered_continuous = true;
        log.events.push_back({WalkEvent::Kind::kRecoveryContinuous, rec.index,
                              t, q + zeta, 0.0, 0.0, {}});
      } else {
        replan_pending = true;
        guard = {GuardKind::kPosition, rt.x_trans, +1};
        log.events.push_back({WalkEvent::Kind::kRecoveryReplanPending,
                              rec.index, t, q + zeta, 0.0, 0.0, {}});
      }
    };

    for (std::size_t i = 0; i < config.max_samples_per_step; ++i) {
      if (local.xd > 0.0) {
        try {
          zeta = rt.progression(local.x, local.xd);
        } catch (const DomainError&) {
          // keep the previous value near the saddle
        }
      }
      double sig = sigmaApex(local.x, local.xd, rt.apex_speed, rt.foot.x(),
                             rt.omega);

      // scheduled disturbances
      bool disturbed_now = false;
      while (dist_idx < disturbances.size()) {
        const Disturbance& d = disturbances[dist_idx];
        const bool fire = (d.trigger == Disturbance::Trigger::kTime)
                              ? (t >= d.at)
                              : (q + zeta >= d.at);
        if (!fire) break;
        const TransitionEvent ev{TransitionEvent::Type::kDisturbed,
                                 TransitionEvent::Effect::kJump, mode,
                                 Eigen::Vector2d(d.dvx, d.dvy)};
        local = applyTransition({zeta, mode, local}, ev).state;
        log.events.push_back({WalkEvent::Kind::kDisturbance, rec.index, t,
                              q + zeta, d.dvx, d.dvy, {}});
        rec.disturbance_count += 1;
        disturbed_now = true;
        if (d.dvy != 0.0) lateral_pending = true;
        ++dist_idx;
      }

      if (disturbed_now) {
        sig = sigmaApex(local.x, local.xd, rt.apex_speed, rt.foot.x(),
                        rt.omega);
        if (zeta_d < 0.0) zeta_d = zeta;
        if (config.enable_recovery && std::abs(sig) > eps && !controller) {
          engageRecovery(local);
        }
      } else if (i > 0 && config.enable_recovery && !controller &&
                 std::abs(sig - sigma_prev) >
                     config.sigma_jump_factor * config.sigma_conservation_tol &&
                 std::abs(sig) > eps) {
        if (zeta_d < 0.0) zeta_d = zeta;
        engageRecovery(local);
      }
      sigma_prev = sig;

      ControlPair u{rt.omega, 0.0};
      if (controller) {
        try {
          u = controller->update(local.x - match.shift, local.xd);
        } catch (const OutOfGrid& e) {
          fail(rec.index,
               std::string("recovery left the policy grid: ") + e.what());
        }
      }
      ControlInput u_local;
      u_local.omega = u.omega;
      u_local.tau_y = u.tau_y;
      u_local.foot = rt.foot;

      if (prev_x < rt.foot.x() && local.x >= rt.foot.x()) {
        const double f = (rt.foot.x() - prev_x) / (local.x - prev_x);
        rec.apex_speed_realized = prev_xd + f * (local.xd - prev_xd);
      }
      prev_x = local.x;
      prev_xd = local.xd;

      {
        WalkSample sample;
        sample.t = t;
        sample.zeta = zeta;
        sample.zeta_cum = q + zeta;
        sample.step = rec.index;
        sample.mode = mode;
        sample.state = toGlobalState(local, rt.frame);
        sample.input = u_local;
        sample.input.foot = rec.foot;
        sample.sigma = sig;
        log.samples.push_back(sample);
      }
      rec.max_abs_sigma = std::max(rec.max_abs_sigma, std::abs(sig));
      if (kappa_samples.empty() || zeta > kappa_samples.back().zeta) {
        kappa_samples.push_back({zeta, sig});
      }

      // step guard; one integrator step at minimum separates transitions
      if (i >= 1) {
        const ManifoldParams& guard_manifold =
            rt.next_manifold ? *rt.next_manifold : rt.manifold;
        if (evalGuard(guard, {zeta, mode, local}, guard_manifold)) {
          if (rt.next_manifold) {
            rec.entry_sigma_next = sigma(local.x, local.xd, *rt.next_manifold);
          }
          if (replan_pending && !last_step) {
            const PhaseState next_local = toLocalState(
                toGlobalState(local, rt.frame), plans[q + 1].frame);
            try {
              replanned_foot_x = replanFoot(next_local.x, next_local.xd,
                                            rt.next_apex,
                                            rt.next_manifold->omega);
            } catch (const InfeasibleApex& e) {
              fail(rec.index,
                   std::string("foot re-plan infeasible: ") + e.what());
            }
          }
          if (!last_step) {
            const TransitionEvent ev{TransitionEvent::Type::kAutonomous,
                                     TransitionEvent::Effect::kSwitching,
                                     next_mode, Eigen::Vector2d::Zero()};
            (void)applyTransition({zeta, mode, local}, ev,
                                  /*allow_direct_swap=*/dual_skipped);
          }
          log.events.push_back({WalkEvent::Kind::kStepTransition, rec.index, t,
                                q + zeta, 0.0, 0.0, {}});
          global_state = toGlobalState(local, rt.frame);
          transitioned = true;
          break;
        }
      }

      // dual-support window around the nominal transition
      if (dual_available && !controller &&
          t + dt > plan.multicontact->t_start) {
        const QuinticSegment& seg = *plan.multicontact;
        dual_skipped = false;
        rk4Local(local, u_local, rt.surface, robot, seg.t_start - t);
        t = std::max(t, seg.t_start);
        mode = applyTransition({zeta, mode, local},
                               {TransitionEvent::Type::kAutonomous,
                                TransitionEvent::Effect::kSwitching,
                                Mode::kDualSupport, Eigen::Vector2d::Zero()})
                   .mode;
        log.events.push_back({WalkEvent::Kind::kDualEnter, rec.index, t,
                              q + zeta, 0.0, 0.0, {}});

        double s_off = std::max(0.0, t - seg.t_start);
        while (s_off < seg.duration) {
          const Eigen::Vector3d p = seg.position(s_off);
          const Eigen::Vector3d v = seg.velocity(s_off);
          WalkSample sample;
          sample.t = t;
          sample.zeta = zeta;
          sample.zeta_cum = q + zeta;
          sample.step = rec.index;
          sample.mode = mode;
          sample.state = {p.x(), p.y(), p.z(), v.x(), v.y(), v.z()};
          sample.input = u_local;
          sample.input.omega = 0.0;
          sample.input.foot = rec.foot;
          sample.sigma = 0.0;  // metric suspended off the pendulum flow
          log.samples.push_back(sample);
          const double h = std::min(dt, seg.duration - s_off);
          s_off += h;
          t += h;
        }
        const Eigen::Vector3d p = seg.position(seg.duration);
        const Eigen::Vector3d v = seg.velocity(seg.duration);
        global_state = {p.x(), p.y(), p.z(), v.x(), v.y(), v.z()};
        {
          const PhaseState end_local = toLocalState(global_state, rt.frame);
          if (rt.next_manifold) {
            rec.entry_sigma_next =
                sigma(end_local.x, end_local.xd, *rt.next_manifold);
          }
        }
        log.events.push_back({WalkEvent::Kind::kDualExit, rec.index, t,
                              q + zeta, 0.0, 0.0, {}});
        (void)applyTransition({zeta, Mode::kDualSupport, global_state},
                              {TransitionEvent::Type::kAutonomous,
                               TransitionEvent::Effect::kSwitching, next_mode,
                               Eigen::Vector2d::Zero()});
        log.events.push_back({WalkEvent::Kind::kStepTransition, rec.index, t,
                              q + zeta, 0.0, 0.0, {}});
        transitioned = true;
        break;
      }

      rk4Local(local, u_local, rt.surface, robot, dt);
      t += dt;
    }

    if (!transitioned) {
      fail(rec.index, "step guard never fired within the sample budget");
    }

    const double z0 = (zeta_d >= 0.0) ? zeta_d : 0.0;
    const double z1 = kappa_samples.empty() ? 0.0 : kappa_samples.back().zeta;
    if (kappa_samples.size() >= 2 && z1 > z0 + 1e-9) {
      try {
        rec.kappa = sensitivityNorm(kappa_samples, z0, z1);
      } catch (const Error&) {
        rec.kappa = 0.0;
      }
    }
    log.steps.push_back(rec);
  }

  log.duration = t;
  return log;
}

}  // namespace phasewalk
