#include "phasewalk/planner.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace phasewalk {

Eigen::Vector2d StepFrame::toLocal(const Eigen::Vector2d& g) const {
  return dirToLocal(g - origin);
}

Eigen::Vector2d StepFrame::toGlobal(const Eigen::Vector2d& l) const {
  return dirToGlobal(l) + origin;
}

Eigen::Vector2d StepFrame::dirToLocal(const Eigen::Vector2d& g) const {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  return {c * g.x() + s * g.y(), -s * g.x() + c * g.y()};
}

Eigen::Vector2d StepFrame::dirToGlobal(const Eigen::Vector2d& l) const {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  return {c * l.x() - s * l.y(), s * l.x() + c * l.y()};
}

Eigen::Vector3d QuinticSegment::position(double s) const {
  Eigen::Vector3d p;
  for (int axis = 0; axis < 3; ++axis) {
    double v = 0.0;
    for (int k = 5; k >= 0; --k) v = v * s + coeffs(axis, k);
    p[axis] = v;
  }
  return p;
}

Eigen::Vector3d QuinticSegment::velocity(double s) const {
  Eigen::Vector3d p;
  for (int axis = 0; axis < 3; ++axis) {
    double v = 0.0;
    for (int k = 5; k >= 1; --k) v = v * s + k * coeffs(axis, k);
    p[axis] = v;
  }
  return p;
}

Eigen::Vector3d QuinticSegment::acceleration(double s) const {
  Eigen::Vector3d p;
  for (int axis = 0; axis < 3; ++axis) {
    double v = 0.0;
    for (int k = 5; k >= 2; --k) v = v * s + k * (k - 1) * coeffs(axis, k);
    p[axis] = v;
  }
  return p;
}

namespace {

// Squared speed at position x of the zero-torque flow through the
// manifold anchor.
double flowSpeedSq(const ManifoldParams& m, double x) {
  const double w2 = m.omega * m.omega;
  const double r = x - m.x_foot;
  const double r0 = m.x0 - m.x_foot;
  return m.xd0 * m.xd0 + w2 * (r * r - r0 * r0);
}

// Time for the forward flow through (x0, xd0) to reach x_target.
double timeToReach(double x0, double xd0, double x_foot, double omega,
                   double x_target) {
  const double a = x0 - x_foot;
  const double b = xd0 / omega;
  const double c = x_target - x_foot;
  const double apb = a + b;
  if (std::abs(apb) < 1e-300) {
    throw Error("flow inversion degenerate on the stable asymptote");
  }
  const double disc = c * c - a * a + b * b;
  if (disc < 0.0) throw Error("flow inversion: target position unreachable");
  const double sq = std::sqrt(disc);
  double u = (c + sq) / apb;
  if (u <= 0.0) u = (c - sq) / apb;
  if (u <= 0.0) throw Error("flow inversion: no forward-time solution");
  return std::log(u) / omega;
}

ComSurface surfaceToFrame(const ComSurface& s, const StepFrame& f) {
  const double c = std::cos(f.heading);
  const double sn = std::sin(f.heading);
  ComSurface out;
  out.a = c * s.a + sn * s.b;
  out.b = -sn * s.a + c * s.b;
  out.c = s.c + s.a * f.origin.x() + s.b * f.origin.y();
  return out;
}

// RK4 rollout of the zero-torque lateral channel, returning the velocity
// at t_apex.
double lateralApexVelocity(double y0, double yd0, double y_foot, double omega,
                           double t_apex, double dt_target) {
  if (t_apex <= 0.0) return yd0;
  const int n = std::max(1, static_cast<int>(std::ceil(t_apex / dt_target)));
  const double h = t_apex / n;
  const double w2 = omega * omega;
  double y = y0;
  double yd = yd0;
  for (int i = 0; i < n; ++i) {
    const double k1y = yd, k1v = w2 * (y - y_foot);
    const double k2y = yd + 0.5 * h * k1v, k2v = w2 * (y + 0.5 * h * k1y - y_foot);
    const double k3y = yd + 0.5 * h * k2v, k3v = w2 * (y + 0.5 * h * k2y - y_foot);
    const double k4y = yd + h * k3v, k4v = w2 * (y + h * k3y - y_foot);
    y += h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y);
    yd += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  return yd;
}

}  // namespace

TransitionPoint findStepTransition(const ManifoldParams& current,
                                   const ManifoldParams& next) {
  double lo = current.x_foot;
  double hi = next.x_foot;
  if (!(hi > lo)) {
    throw TransitionNotFound("next contact does not lie ahead of the current");
  }

  auto mismatch = [&](double x) -> double {
    const double v2 = flowSpeedSq(current, x);
    if (v2 < 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sigma(x, std::sqrt(v2), next);
  };

  double f_lo = mismatch(lo);
  double f_hi = mismatch(hi);
  if (!std::isfinite(f_lo) || !std::isfinite(f_hi)) {
    throw TransitionNotFound("flow reverses inside the transition bracket");
  }
  if (f_lo == 0.0) return {lo, std::sqrt(flowSpeedSq(current, lo))};
  if (f_hi == 0.0) return {hi, std::sqrt(flowSpeedSq(current, hi))};
  if (std::signbit(f_lo) == std::signbit(f_hi)) {
    throw TransitionNotFound("manifolds do not intersect inside the bracket");
  }

  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double f_mid = mismatch(mid);
    if (f_mid == 0.0) return {mid, std::sqrt(flowSpeedSq(current, mid))};
    if (std::signbit(f_mid) == std::signbit(f_lo)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  const double x = 0.5 * (lo + hi);
  return {x, std::sqrt(flowSpeedSq(current, x))};
}

double searchLateralFoot(double y_init, double yd_init, double omega,
                         double t_apex, double y_min, double y_max, double tol,
                         int n_max, double dt) {
  if (!(y_max >= y_min)) throw OutOfBounds("empty lateral search interval");
  auto clampFoot = [&](double v) { return std::clamp(v, y_min, y_max); };
  auto apexVel = [&](double yf) {
    return lateralApexVelocity(y_init, yd_init, yf, omega, t_apex, dt);
  };

  double y_foot = clampFoot(y_init + yd_init / omega);
  double v = apexVel(y_foot);
  if (std::abs(v) <= tol) return y_foot;

  const double probe_step = 1e-4;
  const double probe = (y_foot + probe_step <= y_max) ? y_foot + probe_step
                                                      : y_foot - probe_step;
  if (probe == y_foot) throw OutOfBounds("degenerate lateral search interval");
  double dv = (apexVel(probe) - v) / (probe - y_foot);

  for (int n = 1; n < n_max; ++n) {
    if (dv == 0.0) throw NoConvergence("flat secant slope in lateral search");
    const double y_next = clampFoot(y_foot - v / dv);
    if (y_next == y_foot) {
      throw OutOfBounds("lateral bound clamp prevents progress");
    }
    const double v_next = apexVel(y_next);
    if (std::abs(v_next) <= tol) return y_next;
    dv = (v_next - v) / (y_next - y_foot);
    y_foot = y_next;
    v = v_next;
  }
  throw NoConvergence("lateral search did not converge");
}

QuinticSegment smoothMulticontact(const BoundaryState& pre,
                                  const BoundaryState& post, double T) {
  if (!(T > 0.0)) throw Error("multicontact duration must be positive");
  QuinticSegment seg;
  seg.duration = T;

  const double t2 = T * T;
  Eigen::Matrix3d m;
  m << t2 * T, t2 * t2, t2 * t2 * T,
       3 * t2, 4 * t2 * T, 5 * t2 * t2,
       6 * T, 12 * t2, 20 * t2 * T;
  const auto solver = m.colPivHouseholderQr();

  for (int axis = 0; axis < 3; ++axis) {
    const double p0 = pre.pos[axis], v0 = pre.vel[axis], a0 = pre.acc[axis];
    const double p1 = post.pos[axis], v1 = post.vel[axis], a1 = post.acc[axis];
    const Eigen::Vector3d rhs(p1 - p0 - v0 * T - 0.5 * a0 * t2,
                              v1 - v0 - a0 * T, a1 - a0);
    const Eigen::Vector3d high = solver.solve(rhs);
    seg.coeffs.row(axis) << p0, v0, 0.5 * a0, high(0), high(1), high(2);
  }
  return seg;
}

namespace {

struct StepChannels {
  // Local-frame entry states and foot placement of one solved step.
  double x_e, xd_e, y_e, yd_e;
  double x_foot, y_foot;
  double omega;
  ComSurface surface;  // local

  FlowPoint sagittal(double t) const {
    return analyticFlow(x_e, xd_e, x_foot, omega, t);
  }
  FlowPoint lateral(double t) const {
    return analyticFlow(y_e, yd_e, y_foot, omega, t);
  }
  BoundaryState boundaryLocal(double t) const {
    const auto sx = sagittal(t);
    const auto sy = lateral(t);
    const double w2 = omega * omega;
    BoundaryState b;
    b.pos = {sx.x, sy.x, surface.heightAt(sx.x, sy.x)};
    b.vel = {sx.xd, sy.xd, surface.a * sx.xd + surface.b * sy.xd};
    const double xdd = w2 * (sx.x - x_foot);
    const double ydd = w2 * (sy.x - y_foot);
    b.acc = {xdd, ydd, surface.a * xdd + surface.b * ydd};
    return b;
  }
};

BoundaryState boundaryToGlobal(const BoundaryState& l, const StepFrame& f) {
  BoundaryState g;
  g.pos.head<2>() = f.toGlobal(l.pos.head<2>());
  g.vel.head<2>() = f.dirToGlobal(l.vel.head<2>());
  g.acc.head<2>() = f.dirToGlobal(l.acc.head<2>());
  g.pos.z() = l.pos.z();
  g.vel.z() = l.vel.z();
  g.acc.z() = l.acc.z();
  return g;
}

Eigen::Vector2d intersectLines(const Eigen::Vector2d& p, const Eigen::Vector2d& d,
                               const Eigen::Vector2d& q, const Eigen::Vector2d& e,
                               bool& ok) {
  const double det = d.x() * e.y() - d.y() * e.x();
  const double scale = d.norm() * e.norm();
  if (std::abs(det) < 1e-10 * std::max(scale, 1e-30)) {
    ok = false;
    return p;
  }
  const Eigen::Vector2d r = q - p;
  const double s = (r.x() * e.y() - r.y() * e.x()) / det;
  ok = true;
  return p + s * d;
}

std::vector<StepPlan> buildChain(const std::vector<StepSpec>& steps,
                                 const RobotParams& params,
                                 const PlannerConfig& cfg, bool steered) {
  if (steps.empty()) throw Error("plan requires at least one step");
  for (std::size_t q = 0; q < steps.size(); ++q) {
    if (steps[q].apex_speed < cfg.min_apex_speed) {
      std::ostringstream msg;
      msg << "step " << q << ": apex speed " << steps[q].apex_speed
          << " below minimum " << cfg.min_apex_speed;
      throw Error(msg.str());
    }
    if (q > 0) {
      const double d = (steps[q].foot - steps[q - 1].foot).norm();
      if (d > cfg.max_step_length) {
        std::ostringstream msg;
        msg << "step " << q << ": stride " << d << " exceeds max step length "
            << cfg.max_step_length;
        throw Error(msg.str());
      }
    }
  }

  std::vector<StepPlan> plans(steps.size());
  const std::size_t n_steps = steps.size();

  double t_global = 0.0;
  Eigen::Vector2d exit_pos = Eigen::Vector2d::Zero();
  Eigen::Vector2d exit_vel = Eigen::Vector2d::Zero();
  Eigen::Vector2d prev_origin = Eigen::Vector2d::Zero();

  for (std::size_t q = 0; q < n_steps; ++q) {
    StepPlan& plan = plans[q];
    plan.spec = steps[q];

    StepFrame frame;
    if (steered) {
      frame.heading = steps[q].heading;
      const Eigen::Vector2d axis(std::cos(frame.heading),
                                 std::sin(frame.heading));
      if (q == 0) {
        frame.origin = axis * axis.dot(steps[0].foot.head<2>());
      } else {
        const Eigen::Vector2d a = steps[q - 1].foot.head<2>();
        const Eigen::Vector2d b = steps[q].foot.head<2>();
        bool ok = false;
        frame.origin = intersectLines(prev_origin, axis, a, b - a, ok);
        if (!ok) {
          const Eigen::Vector2d mid = 0.5 * (a + b);
          frame.origin = prev_origin + axis * axis.dot(mid - prev_origin);
        }
      }
    }
    plan.frame = frame;
    prev_origin = frame.origin;

    plan.surface_local = surfaceToFrame(steps[q].surface, frame);
    const Eigen::Vector2d foot_xy = frame.toLocal(steps[q].foot.head<2>());
    plan.foot_local = {foot_xy.x(), foot_xy.y(), steps[q].foot.z()};

    double omega = omegaFromSurface(plan.surface_local, plan.foot_local, params);

    // entry state in this frame
    double x_e, xd_e, y_e, yd_e;
    if (q == 0) {
      x_e = plan.foot_local.x();
      xd_e = steps[q].apex_speed;
      y_e = cfg.y_start;
      yd_e = cfg.yd_start;
    } else {
      const Eigen::Vector2d p = frame.toLocal(exit_pos);
      const Eigen::Vector2d v = frame.dirToLocal(exit_vel);
      x_e = p.x();
      xd_e = v.x();
      y_e = p.y();
      yd_e = v.y();
      if (!(xd_e > 0.0)) {
        std::ostringstream msg;
        msg << "step " << q << ": entry sagittal velocity " << xd_e
            << " is not forward";
        throw Error(msg.str());
      }
    }

    // time from entry to the sagittal apex
    double t_apex_local = 0.0;
    if (q > 0) {
      const double ratio = -omega * (x_e - plan.foot_local.x()) / xd_e;
      if (!(ratio > 0.0 && ratio < 1.0)) {
        std::ostringstream msg;
        msg << "step " << q << ": entry state cannot reach the apex";
        throw Error(msg.str());
      }
      t_apex_local = std::atanh(ratio) / omega;
    }

    // lateral foot placement; the first contact keeps its given position
    double y_foot = plan.foot_local.y();
    if (q > 0) {
      try {
        y_foot = searchLateralFoot(y_e, yd_e, omega, t_apex_local,
                                   y_foot - cfg.lateral_halfwidth,
                                   y_foot + cfg.lateral_halfwidth,
                                   cfg.lateral_tol, cfg.lateral_max_iter,
                                   cfg.dt);
      } catch (const NoConvergence& e) {
        std::ostringstream msg;
        msg << "step " << q << ": " << e.what();
        throw LateralSearchFailed(msg.str());
      } catch (const OutOfBounds& e) {
        std::ostringstream msg;
        msg << "step " << q << ": " << e.what();
        throw LateralSearchFailed(msg.str());
      }
      plan.foot_local.y() = y_foot;
      // a lateral surface slope couples omega to the placement
      if (plan.surface_local.b != 0.0) {
        omega = omegaFromSurface(plan.surface_local, plan.foot_local, params);
        const double ratio = -omega * (x_e - plan.foot_local.x()) / xd_e;
        if (!(ratio > 0.0 && ratio < 1.0)) {
          std::ostringstream msg;
          msg << "step " << q << ": entry state cannot reach the apex";
          throw Error(msg.str());
        }
        t_apex_local = std::atanh(ratio) / omega;
      }
    }
    plan.y_foot_local = y_foot;
    plan.omega = omega;
    plan.manifold =
        ManifoldParams::apex(plan.foot_local.x(), steps[q].apex_speed, omega);
    {
      const Eigen::Vector2d fg = frame.toGlobal({plan.foot_local.x(), y_foot});
      plan.spec.foot = {fg.x(), fg.y(), plan.foot_local.z()};
    }

    plan.entry_time = t_global;
    plan.apex_time = t_global + t_apex_local;
    plan.entry_local.x = x_e;
    plan.entry_local.y = y_e;
    plan.entry_local.z = plan.surface_local.heightAt(x_e, y_e);
    plan.entry_local.xd = xd_e;
    plan.entry_local.yd = yd_e;
    plan.entry_local.zd =
        plan.surface_local.a * xd_e + plan.surface_local.b * yd_e;

    // transition out of this step
    double t_exit_local;
    TransitionPoint tp{};
    if (q + 1 < n_steps) {
      const StepSpec& next = steps[q + 1];
      const Eigen::Vector2d nf_xy = frame.toLocal(next.foot.head<2>());
      const Eigen::Vector3d nf_local(nf_xy.x(), nf_xy.y(), next.foot.z());
      const double omega_next = omegaFromSurface(
          surfaceToFrame(next.surface, frame), nf_local, params);
      plan.next_manifold =
          ManifoldParams::apex(nf_xy.x(), next.apex_speed, omega_next);
      plan.next_apex_speed = next.apex_speed;

      const ManifoldParams flow{x_e, xd_e, plan.foot_local.x(), omega};
      try {
        tp = findStepTransition(flow, *plan.next_manifold);
      } catch (const TransitionNotFound& e) {
        std::ostringstream msg;
        msg << "step " << q << ": " << e.what();
        throw TransitionNotFound(msg.str());
      }
      t_exit_local =
          timeToReach(x_e, xd_e, plan.foot_local.x(), omega, tp.x);
    } else {
      t_exit_local = t_apex_local + cfg.final_half_duration;
      const auto end = analyticFlow(x_e, xd_e, plan.foot_local.x(), omega,
                                    t_exit_local);
      tp = {end.x, end.xd};
    }
    plan.transition = {tp.x, tp.xd, 1.0, t_global + t_exit_local};

    StepChannels ch{x_e, xd_e, y_e, yd_e, plan.foot_local.x(), y_foot,
                    omega, plan.surface_local};

    // sample the step on a uniform clock shared by all channels
    const int n_samples = std::max(
        1, static_cast<int>(std::floor(t_exit_local / cfg.dt + 1e-12)));
    plan.trajectory.clear();
    plan.trajectory.reserve(static_cast<std::size_t>(n_samples) + 2);
    ControlInput input;
    input.omega = omega;
    input.foot = plan.spec.foot;
    auto emit = [&](double t_local) {
      const BoundaryState b = boundaryToGlobal(ch.boundaryLocal(t_local), frame);
      PhaseState s;
      s.x = b.pos.x();
      s.y = b.pos.y();
      s.z = b.pos.z();
      s.xd = b.vel.x();
      s.yd = b.vel.y();
      s.zd = b.vel.z();
      plan.trajectory.push_back({t_global + t_local, s, input});
    };
    for (int k = 0; k < n_samples; ++k) emit(k * cfg.dt);
    if (n_samples * cfg.dt < t_exit_local) emit(t_exit_local);

    plan.progression = StepProgression(plan.manifold, x_e, xd_e, tp.x, tp.xd);

    // chain into the next step
    const BoundaryState exit_b =
        boundaryToGlobal(ch.boundaryLocal(t_exit_local), frame);
    exit_pos = exit_b.pos.head<2>();
    exit_vel = exit_b.vel.head<2>();
    t_global += t_exit_local;
  }

  // multi-contact bridges
  if (cfg.multicontact_fraction > 0.0) {
    for (std::size_t q = 0; q + 1 < n_steps; ++q) {
      StepPlan& cur = plans[q];
      const StepPlan& nxt = plans[q + 1];
      const double dur_cur = cur.transition.time - cur.entry_time;
      const double dur_nxt = nxt.transition.time - nxt.entry_time;
      double half = 0.5 * cfg.multicontact_fraction * std::min(dur_cur, dur_nxt);
      half = std::min(half, cur.transition.time - cur.apex_time);
      half = std::min(half, nxt.apex_time - cur.transition.time);
      if (half <= 0.0) continue;

      const StepChannels ch_cur{cur.entry_local.x, cur.entry_local.xd,
                                cur.entry_local.y, cur.entry_local.yd,
                                cur.foot_local.x(), cur.y_foot_local,
                                cur.omega, cur.surface_local};
      const StepChannels ch_nxt{nxt.entry_local.x, nxt.entry_local.xd,
                                nxt.entry_local.y, nxt.entry_local.yd,
                                nxt.foot_local.x(), nxt.y_foot_local,
                                nxt.omega, nxt.surface_local};
      const double t0 = cur.transition.time - half;
      const double t1 = cur.transition.time + half;
      const BoundaryState pre = boundaryToGlobal(
          ch_cur.boundaryLocal(t0 - cur.entry_time), cur.frame);
      const BoundaryState post = boundaryToGlobal(
          ch_nxt.boundaryLocal(t1 - nxt.entry_time), nxt.frame);
      QuinticSegment seg = smoothMulticontact(pre, post, 2.0 * half);
      seg.t_start = t0;
      cur.multicontact = seg;
    }
  }

  return plans;
}

}  // namespace

std::vector<StepPlan> generateNominal(const std::vector<StepSpec>& steps,
                                      const RobotParams& params,
                                      const PlannerConfig& cfg) {
  return buildChain(steps, params, cfg, /*steered=*/false);
}

std::vector<StepPlan> planSteeredWalk(const std::vector<StepSpec>& steps,
                                      const RobotParams& params,
                                      const PlannerConfig& cfg) {
  const bool all_zero =
      std::all_of(steps.begin(), steps.end(),
                  [](const StepSpec& s) { return s.heading == 0.0; });
  if (all_zero) return buildChain(steps, params, cfg, /*steered=*/false);
  return buildChain(steps, params, cfg, /*steered=*/true);
}

}  // namespace phasewalk
