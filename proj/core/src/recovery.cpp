#include "phasewalk/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace phasewalk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kPolicyFormatVersion = 1;

std::uint64_t fnv1a(std::uint64_t hash, const void* data, std::size_t len) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::uint64_t hashDoubles(std::uint64_t hash,
                          std::initializer_list<double> values) {
  for (double v : values) hash = fnv1a(hash, &v, sizeof(v));
  return hash;
}

}  // namespace

int GridAxis::quantize(double v) const {
  if (!contains(v)) {
    std::ostringstream msg;
    msg << "value " << v << " outside grid [" << min << ", " << max() << "]";
    throw OutOfGrid(msg.str());
  }
  const double r = (v - min) / res;
  int i = static_cast<int>(std::ceil(r - 0.5));
  return std::clamp(i, 0, count - 1);
}

namespace {

GridAxis rangeAxis(double lo, double hi, double res) {
  const int count = static_cast<int>(std::round((hi - lo) / res)) + 1;
  return {lo, res, count};
}

GridAxis countAxis(double lo, double hi, int count) {
  const double res = (count > 1) ? (hi - lo) / (count - 1) : 1.0;
  return {lo, res, count};
}

}  // namespace

GridAxis DpParams::stageAxis() const {
  return rangeAxis(stage_min, stage_max, stage_res);
}
GridAxis DpParams::stateAxis() const {
  return rangeAxis(state_min, state_max, state_res);
}
GridAxis DpParams::omegaAxis() const {
  return countAxis(omega_min, omega_max, omega_count);
}
GridAxis DpParams::tauAxis() const {
  return countAxis(tau_min, tau_max, tau_count);
}

void DpParams::validate() const {
  if (!(stage_res > 0.0) || !(state_res > 0.0)) {
    throw ConfigError("dp grid resolutions must be positive");
  }
  if (!(stage_max > stage_min) || !(state_max > state_min)) {
    throw ConfigError("dp grid ranges must be non-empty");
  }
  if (omega_count < 1 || tau_count < 1) {
    throw ConfigError("dp control grids must be non-empty");
  }
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must be in (0, 1]");
  if (alpha < 0.0 || beta < 0.0 || gamma1 < 0.0 || gamma2 < 0.0) {
    throw ConfigError("dp weights must be non-negative");
  }
}

double stageAcceleration(double xd_n, double xd_next, double dx) {
  return (xd_next * xd_next - xd_n * xd_n) / (2.0 * dx);
}

std::uint64_t dpBuildHash(const DpParams& p, const StepSpec& step,
                          const RobotParams& robot) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  h = hashDoubles(h, {p.stage_min, p.stage_max, p.stage_res, p.state_min,
                      p.state_max, p.state_res, p.omega_min, p.omega_max,
                      static_cast<double>(p.omega_count), p.tau_min, p.tau_max,
                      static_cast<double>(p.tau_count), p.alpha, p.beta,
                      p.gamma1, p.gamma2, p.eta, p.omega_ref, p.tau_ref});
  h = hashDoubles(h, {step.foot.x(), step.foot.y(), step.foot.z(),
                      step.surface.a, step.surface.b, step.surface.c,
                      step.apex_speed, step.heading});
  h = hashDoubles(h, {robot.mass, robot.gravity});
  return h;
}

PolicyTable dpBuild(const DpParams& params, const StepSpec& step,
                    const BundleSpec& bundle, const RobotParams& robot) {
  (void)bundle;
  params.validate();

  PolicyTable table;
  table.params = params;
  table.x_foot = step.foot.x();
  table.apex_speed = step.apex_speed;
  table.omega_nominal = omegaFromSurface(step.surface, step.foot, robot);
  table.mass = robot.mass;
  table.gravity = robot.gravity;
  table.build_hash = dpBuildHash(params, step, robot);

  const GridAxis stages = params.stageAxis();
  const GridAxis states = params.stateAxis();
  const GridAxis omegas = params.omegaAxis();
  const GridAxis taus = params.tauAxis();

  if (!(stages.min <= table.x_foot && table.x_foot <= stages.max())) {
    throw ConfigError("dp stage grid does not cover the step contact");
  }
  if (!omegas.contains(params.omega_ref) ||
      std::abs(omegas.value(omegas.quantize(params.omega_ref)) -
               params.omega_ref) > 1e-9) {
    throw ConfigError("dp omega grid does not contain omega_ref");
  }

  // predicted transition velocity on the nominal manifold at the final stage
  {
    const double w = table.omega_nominal;
    const double r = stages.max() - table.x_foot;
    table.xd_pred = std::sqrt(step.apex_speed * step.apex_speed + w * w * r * r);
  }

  const int n_stage = stages.count;
  const int n_state = states.count;
  table.value.assign(static_cast<std::size_t>(n_stage) * n_state, kInf);
  table.policy.assign(static_cast<std::size_t>(n_stage - 1) * n_state,
                      {params.omega_ref, params.tau_ref});

  // terminal cost
  for (int j = 0; j < n_state; ++j) {
    const double dv = states.value(j) - table.xd_pred;
    table.value[table.cell(n_stage - 1, j)] = params.alpha * dv * dv;
  }

  const double mg = robot.mass * robot.gravity;
  const double dx = params.stage_res;

  for (int n = n_stage - 2; n >= 0; --n) {
    const double x_n = stages.value(n);
    const double x_mid = x_n + 0.5 * dx;
    bool any_feasible = false;

    for (int j = 0; j < n_state; ++j) {
      const double xd_n = states.value(j);
      double best = kInf;
      ControlPair best_u{params.omega_ref, params.tau_ref};

      for (int iw = 0; iw < omegas.count; ++iw) {
        const double w = omegas.value(iw);
        const double w2 = w * w;
        for (int it = 0; it < taus.count; ++it) {
          const double tau = taus.value(it);
          const double acc = w2 * (x_n - table.x_foot) - w2 / mg * tau;
          const double v2 = xd_n * xd_n + 2.0 * acc * dx;
          if (v2 <= 0.0) continue;
          const double xd_next = std::sqrt(v2);
          if (!states.contains(xd_next)) continue;
          const double v_next = table.value[table.cell(n + 1, states.quantize(xd_next))];
          if (!std::isfinite(v_next)) continue;

          const double xd_mid = 0.5 * (xd_n + xd_next);
          const double sig = sigmaApex(x_mid, xd_mid, table.apex_speed,
                                       table.x_foot, table.omega_nominal);
          const double dw = w - params.omega_ref;
          const double stage_cost =
              (params.beta * sig * sig + params.gamma1 * tau * tau +
               params.gamma2 * dw * dw) * dx;
          const double total = stage_cost + params.eta * v_next;
          if (total < best) {
            best = total;
            best_u = {w, tau};
          }
        }
      }
      table.value[table.cell(n, j)] = best;
      if (std::isfinite(best)) {
        any_feasible = true;
        table.policy[table.cell(n, j)] = best_u;
      }
    }
    if (!any_feasible) {
      std::ostringstream msg;
      msg << "no feasible transition at stage " << n
          << "; refine the state grid or widen the control ranges";
      throw GridTooCoarse(msg.str());
    }
  }
  return table;
}

ControlPair dpLookup(const PolicyTable& table, double x, double xd) {
  const GridAxis stages = table.params.stageAxis();
  const GridAxis states = table.params.stateAxis();
  const int n = std::min(stages.quantize(x), stages.count - 2);
  const int j = states.quantize(xd);
  return table.policy[table.cell(n, j)];
}

ControlPair saturatedControl(double sig, double eps, const ControlPair& u_dp,
                             const ControlPair& u_eps,
                             const ControlPair& u_ref) {
  if (!(eps > 0.0)) throw Error("boundary layer width must be positive");
  const double m = std::abs(sig);
  if (m > eps) return u_dp;
  const double a = m / eps;
  const double b = (eps - m) / eps;
  return {a * u_eps.omega + b * u_ref.omega, a * u_eps.tau_y + b * u_ref.tau_y};
}

double replanFoot(double x_trans, double xd_trans, double xd_apex_next,
                  double omega) {
  const double rad =
      xd_trans * xd_trans - xd_apex_next * xd_apex_next;
  if (rad < 0.0) {
    std::ostringstream msg;
    msg << "requested apex speed " << xd_apex_next
        << " exceeds transition speed " << xd_trans;
    throw InfeasibleApex(msg.str());
  }
  return x_trans + std::sqrt(rad) / omega;
}

std::vector<StageRolloutPoint> policyRollout(const PolicyTable& table,
                                             double x, double xd) {
  const GridAxis stages = table.params.stageAxis();
  const GridAxis states = table.params.stateAxis();
  const double mg = table.mass * table.gravity;
  const double dx = table.params.stage_res;

  std::vector<StageRolloutPoint> trace;
  int n = stages.quantize(x);
  double v = xd;
  auto sig = [&](double xx, double vv) {
    return sigmaApex(xx, vv, table.apex_speed, table.x_foot,
                     table.omega_nominal);
  };
  while (n < stages.count - 1) {
    const double x_n = stages.value(n);
    if (!states.contains(v)) break;
    const ControlPair u = table.policy[table.cell(n, states.quantize(v))];
    trace.push_back({x_n, v, sig(x_n, v), u});
    const double w2 = u.omega * u.omega;
    const double acc = w2 * (x_n - table.x_foot) - w2 / mg * u.tau_y;
    const double v2 = v * v + 2.0 * acc * dx;
    if (v2 <= 0.0) return trace;
    v = std::sqrt(v2);
    ++n;
  }
  if (states.contains(v)) {
    trace.push_back({stages.value(n), v, sig(stages.value(n), v),
                     {table.omega_nominal, 0.0}});
  }
  return trace;
}

bool cellRecoverable(const PolicyTable& table, const BundleSpec& bundle,
                     double x, double xd) {
  const GridAxis stages = table.params.stageAxis();
  const GridAxis states = table.params.stateAxis();
  if (!stages.contains(x) || !states.contains(xd)) return false;
  if (!std::isfinite(
          table.value[table.cell(stages.quantize(x), states.quantize(xd))])) {
    return false;
  }
  const auto trace = policyRollout(table, x, xd);
  if (trace.empty()) return false;
  for (const auto& pt : trace) {
    if (std::abs(pt.sig) <= bundle.epsilon) return true;
  }
  return false;
}

RegionMap estimateRecoverableRegion(const GridAxis& stages,
                                    const GridAxis& states,
                                    const ControlRanges& ranges,
                                    const BundleSpec& bundle,
                                    const PolicyTable& table) {
  const GridAxis t_stages = table.params.stageAxis();
  const GridAxis t_states = table.params.stateAxis();
  if (stages.min != t_stages.min || stages.res != t_stages.res ||
      stages.count != t_stages.count || states.min != t_states.min ||
      states.res != t_states.res || states.count != t_states.count) {
    throw GridMismatch("query grid differs from the policy-table grid");
  }
  if (ranges.omega_min != table.params.omega_min ||
      ranges.omega_max != table.params.omega_max ||
      ranges.tau_min != table.params.tau_min ||
      ranges.tau_max != table.params.tau_max) {
    throw GridMismatch("control ranges differ from the policy-table ranges");
  }

  RegionMap map;
  map.stages = stages;
  map.states = states;
  map.member.assign(static_cast<std::size_t>(stages.count) * states.count,
                    false);
  for (int n = 0; n < stages.count; ++n) {
    for (int j = 0; j < states.count; ++j) {
      map.member[static_cast<std::size_t>(n) * states.count + j] =
          cellRecoverable(table, bundle, stages.value(n), states.value(j));
    }
  }
  return map;
}

RecoveryController::RecoveryController(const PolicyTable& table,
                                       const BundleSpec& bundle,
                                       const ControlPair& u_ref)
    : table_(&table), bundle_(bundle), u_ref_(u_ref), u_last_(u_ref) {}

ControlPair RecoveryController::update(double x, double xd) {
  const GridAxis stages = table_->params.stageAxis();
  const GridAxis states = table_->params.stateAxis();
  const double sig = sigmaApex(x, xd, table_->apex_speed, table_->x_foot,
                               table_->omega_nominal);
  if (std::abs(sig) > bundle_.epsilon) {
    const double xc = std::clamp(x, stages.min, stages.max());
    const ControlPair u = dpLookup(*table_, xc, xd);
    u_last_ = u;
    return u;
  }
  if (!u_eps_) u_eps_ = u_last_;
  const ControlPair u = saturatedControl(sig, bundle_.epsilon, u_last_,
                                         *u_eps_, u_ref_);
  u_last_ = u;
  return u;
}

RecoveryAction recover(const PhaseState& local_state, const StepPlan& plan,
                       const PolicyTable& table, const BundleSpec& bundle) {
  RecoveryAction action;
  if (cellRecoverable(table, bundle, local_state.x, local_state.xd)) {
    action.kind = RecoveryAction::Kind::kContinuous;
    action.controls = dpLookup(table, local_state.x, local_state.xd);
    return action;
  }
  if (!plan.next_manifold) {
    // terminal step: continuous best effort is all that is available
    action.kind = RecoveryAction::Kind::kContinuous;
    const GridAxis stages = table.params.stageAxis();
    const GridAxis states = table.params.stateAxis();
    const double xc = std::clamp(local_state.x, stages.min, stages.max());
    const double vc = std::clamp(local_state.xd, states.min, states.max());
    action.controls = dpLookup(table, xc, vc);
    return action;
  }

  action.kind = RecoveryAction::Kind::kReplanFoot;
  const auto trace = policyRollout(table, local_state.x, local_state.xd);
  const double xd_trans = trace.empty() ? local_state.xd : trace.back().xd;
  action.new_x_foot = replanFoot(table.params.stage_max, xd_trans,
                                 plan.next_apex_speed,
                                 plan.next_manifold->omega);
  action.controls = dpLookup(
      table,
      std::clamp(local_state.x, table.params.stage_min, table.params.stage_max),
      std::clamp(local_state.xd, table.params.state_min, table.params.state_max));
  return action;
}

std::vector<RecoverySample> simulateRecovery(const PolicyTable& table,
                                             const BundleSpec& bundle,
                                             double x0, double xd0,
                                             double dt) {
  RecoveryController controller(table, bundle,
                                {table.omega_nominal, 0.0});
  const double mg = table.mass * table.gravity;
  const double x_end = table.params.stage_max;

  std::vector<RecoverySample> trace;
  double t = 0.0;
  double x = x0;
  double xd = xd0;
  const std::size_t max_iters = 10'000'000;
  for (std::size_t i = 0; i < max_iters; ++i) {
    const ControlPair u = controller.update(x, xd);
    const double sig = sigmaApex(x, xd, table.apex_speed, table.x_foot,
                                 table.omega_nominal);
    trace.push_back({t, x, xd, sig, u});
    if (x >= x_end) return trace;

    const double w2 = u.omega * u.omega;
    auto acc = [&](double xx) { return w2 * (xx - table.x_foot) - w2 / mg * u.tau_y; };
    const double k1x = xd, k1v = acc(x);
    const double k2x = xd + 0.5 * dt * k1v, k2v = acc(x + 0.5 * dt * k1x);
    const double k3x = xd + 0.5 * dt * k2v, k3v = acc(x + 0.5 * dt * k2x);
    const double k4x = xd + dt * k3v, k4v = acc(x + dt * k3x);
    x += dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
    xd += dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    t += dt;
  }
  throw MaxSamplesExceeded("recovery rollout did not reach the final stage");
}

void savePolicyTable(const PolicyTable& table,
                     const std::optional<RegionMap>& region,
                     const std::string& path) {
  nlohmann::json j;
  j["format_version"] = kPolicyFormatVersion;
  const DpParams& p = table.params;
  j["dp_params"] = {
      {"stage_min", p.stage_min},   {"stage_max", p.stage_max},
      {"stage_res", p.stage_res},   {"state_min", p.state_min},
      {"state_max", p.state_max},   {"state_res", p.state_res},
      {"omega_min", p.omega_min},   {"omega_max", p.omega_max},
      {"omega_count", p.omega_count}, {"tau_min", p.tau_min},
      {"tau_max", p.tau_max},       {"tau_count", p.tau_count},
      {"alpha", p.alpha},           {"beta", p.beta},
      {"gamma1", p.gamma1},         {"gamma2", p.gamma2},
      {"eta", p.eta},               {"omega_ref", p.omega_ref},
      {"tau_ref", p.tau_ref}};
  j["step"] = {{"x_foot", table.x_foot},
               {"apex_speed", table.apex_speed},
               {"omega_nominal", table.omega_nominal},
               {"xd_pred", table.xd_pred},
               {"mass", table.mass},
               {"gravity", table.gravity}};
  j["build_hash"] = table.build_hash;

  nlohmann::json values = nlohmann::json::array();
  for (double v : table.value) {
    if (std::isfinite(v)) values.push_back(v);
    else values.push_back(nullptr);
  }
  j["value"] = std::move(values);

  nlohmann::json pw = nlohmann::json::array();
  nlohmann::json pt = nlohmann::json::array();
  for (const auto& u : table.policy) {
    pw.push_back(u.omega);
    pt.push_back(u.tau_y);
  }
  j["policy_omega"] = std::move(pw);
  j["policy_tau"] = std::move(pt);

  if (region) {
    nlohmann::json r = nlohmann::json::array();
    for (bool b : region->member) r.push_back(b ? 1 : 0);
    j["region"] = std::move(r);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump() << "\n";
  if (!out) throw IoError("write failed: " + path);
}

std::pair<PolicyTable, std::optional<RegionMap>> loadPolicyTable(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  in >> j;

  if (!j.contains("format_version") ||
      j["format_version"].get<int>() != kPolicyFormatVersion) {
    throw IoError("unsupported policy table format version in " + path);
  }

  PolicyTable table;
  const auto& p = j.at("dp_params");
  table.params.stage_min = p.at("stage_min").get<double>();
  table.params.stage_max = p.at("stage_max").get<double>();
  table.params.stage_res = p.at("stage_res").get<double>();
  table.params.state_min = p.at("state_min").get<double>();
  table.params.state_max = p.at("state_max").get<double>();
  table.params.state_res = p.at("state_res").get<double>();
  table.params.omega_min = p.at("omega_min").get<double>();
  table.params.omega_max = p.at("omega_max").get<double>();
  table.params.omega_count = p.at("omega_count").get<int>();
  table.params.tau_min = p.at("tau_min").get<double>();
  table.params.tau_max = p.at("tau_max").get<double>();
  table.params.tau_count = p.at("tau_count").get<int>();
  table.params.alpha = p.at("alpha").get<double>();
  table.params.beta = p.at("beta").get<double>();
  table.params.gamma1 = p.at("gamma1").get<double>();
  table.params.gamma2 = p.at("gamma2").get<double>();
  table.params.eta = p.at("eta").get<double>();
  table.params.omega_ref = p.at("omega_ref").get<double>();
  table.params.tau_ref = p.at("tau_ref").get<double>();

  const auto& s = j.at("step");
  table.x_foot = s.at("x_foot").get<double>();
  table.apex_speed = s.at("apex_speed").get<double>();
  table.omega_nominal = s.at("omega_nominal").get<double>();
  table.xd_pred = s.at("xd_pred").get<double>();
  table.mass = s.at("mass").get<double>();
  table.gravity = s.at("gravity").get<double>();
  table.build_hash = j.at("build_hash").get<std::uint64_t>();

  for (const auto& v : j.at("value")) {
    table.value.push_back(v.is_null() ? kInf : v.get<double>());
  }
  const auto& pw = j.at("policy_omega");
  const auto& pt = j.at("policy_tau");
  for (std::size_t i = 0; i < pw.size(); ++i) {
    table.policy.push_back({pw[i].get<double>(), pt[i].get<double>()});
  }

  const std::size_t expect_values =
      static_cast<std::size_t>(table.stageCount()) * table.stateCount();
  const std::size_t expect_policy =
      static_cast<std::size_t>(table.stageCount() - 1) * table.stateCount();
  if (table.value.size() != expect_values ||
      table.policy.size() != expect_policy) {
    throw IoError("policy table arrays do not match the grid in " + path);
  }

  std::optional<RegionMap> region;
  if (j.contains("region")) {
    RegionMap map;
    map.stages = table.params.stageAxis();
    map.states = table.params.stateAxis();
    for (const auto& b : j.at("region")) map.member.push_back(b.get<int>() != 0);
    if (map.member.size() != expect_values) {
      throw IoError("region grid does not match the policy grid in " + path);
    }
    region = std::move(map);
  }
  return {std::move(table), std::move(region)};
}

}  // namespace phasewalk
