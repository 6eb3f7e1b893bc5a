#include "phasewalk/pipm.hpp"

#include <cmath>
#include <sstream>

namespace phasewalk {

bool PhaseState::allFinite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) &&
         std::isfinite(xd) && std::isfinite(yd) && std::isfinite(zd);
}

double omegaFromSurface(const ComSurface& surface, const Eigen::Vector3d& foot,
                        const RobotParams& params) {
  const double z_apex = surface.apexHeight(foot);
  if (!(z_apex > 0.0)) {
    std::ostringstream msg;
    msg << "non-positive apex height " << z_apex << " at foot ("
        << foot.x() << ", " << foot.y() << ", " << foot.z() << ")";
    throw NonPositiveApexHeight(msg.str());
  }
  return std::sqrt(params.gravity / z_apex);
}

PhaseState pipmDerivative(const PhaseState& state, const ControlInput& input,
                          const ComSurface& surface, const RobotParams& params,
                          OmegaMode mode) {
  if (mode == OmegaMode::kChecked) {
    const double omega_surface = omegaFromSurface(surface, input.foot, params);
    const double rel = std::abs(input.omega - omega_surface) /
                       std::max(omega_surface, 1e-300);
    if (rel > kOmegaConsistencyTol) {
      std::ostringstream msg;
      msg << "control omega " << input.omega
          << " inconsistent with surface omega " << omega_surface;
      throw InconsistentOmega(msg.str());
    }
  }

  const double w2 = input.omega * input.omega;
  const double mg = params.mass * params.gravity;
  const double xdd = w2 * (state.x - input.foot.x()) -
                     w2 / mg * (input.tau_y + surface.b * input.tau_z);
  const double ydd = w2 * (state.y - input.foot.y()) -
                     w2 / mg * (input.tau_x + surface.a * input.tau_z);
  const double zdd = surface.a * xdd + surface.b * ydd;

  PhaseState d;
  d.x = state.xd;
  d.y = state.yd;
  d.z = state.zd;
  d.xd = xdd;
  d.yd = ydd;
  d.zd = zdd;
  return d;
}

FlowPoint analyticFlow(double x0, double xd0, double x_foot, double omega,
                       double t) {
  const double ch = std::cosh(omega * t);
  const double sh = std::sinh(omega * t);
  const double r0 = x0 - x_foot;
  return {r0 * ch + xd0 / omega * sh + x_foot,
          omega * r0 * sh + xd0 * ch};
}

double timeFromApex(double x, double x_foot, double xd_apex, double omega) {
  return std::asinh(omega * (x - x_foot) / xd_apex) / omega;
}

namespace {

PhaseState axpy(const PhaseState& s, const PhaseState& d, double h) {
  PhaseState out;
  out.x = s.x + h * d.x;
  out.y = s.y + h * d.y;
  out.z = s.z + h * d.z;
  out.xd = s.xd + h * d.xd;
  out.yd = s.yd + h * d.yd;
  out.zd = s.zd + h * d.zd;
  return out;
}

PhaseState rk4Step(const PhaseState& s, const ControlInput& u,
                   const ComSurface& surf, const RobotParams& p, double h,
                   OmegaMode mode) {
  const PhaseState k1 = pipmDerivative(s, u, surf, p, mode);
  const PhaseState k2 = pipmDerivative(axpy(s, k1, h / 2), u, surf, p, mode);
  const PhaseState k3 = pipmDerivative(axpy(s, k2, h / 2), u, surf, p, mode);
  const PhaseState k4 = pipmDerivative(axpy(s, k3, h), u, surf, p, mode);

  PhaseState out = s;
  out.x += h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
  out.y += h / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y);
  out.z += h / 6 * (k1.z + 2 * k2.z + 2 * k3.z + k4.z);
  out.xd += h / 6 * (k1.xd + 2 * k2.xd + 2 * k3.xd + k4.xd);
  out.yd += h / 6 * (k1.yd + 2 * k2.yd + 2 * k3.yd + k4.yd);
  out.zd += h / 6 * (k1.zd + 2 * k2.zd + 2 * k3.zd + k4.zd);
  return out;
}

PhaseState eulerStep(const PhaseState& s, const ControlInput& u,
                     const ComSurface& surf, const RobotParams& p, double h,
                     OmegaMode mode) {
  return axpy(s, pipmDerivative(s, u, surf, p, mode), h);
}

}  // namespace

Trajectory integrate(const PhaseState& state, const ControlInput& input,
                     const ComSurface& surface, const RobotParams& params,
                     const IntegrateOptions& opts, const StopPredicate& stop) {
  if (opts.dt == 0.0) throw Error("integrate: dt must be nonzero");

  Trajectory traj;
  traj.reserve(256);

  PhaseState s = state;
  double t = 0.0;
  for (std::size_t i = 0; i <= opts.max_samples; ++i) {
    traj.push_back({t, s, input});
    if (stop(s)) return traj;
    if (i == opts.max_samples) break;
    s = (opts.kind == IntegratorKind::kRk4)
            ? rk4Step(s, input, surface, params, opts.dt, opts.omega_mode)
            : eulerStep(s, input, surface, params, opts.dt, opts.omega_mode);
    t += opts.dt;
  }
  throw MaxSamplesExceeded("integrate: stop predicate never fired");
}

}  // namespace phasewalk
