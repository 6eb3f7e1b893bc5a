#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "phasewalk/scenario.hpp"

namespace phasewalk {

TerrainKind terrainKindFromString(const std::string& s) {
  if (s == "flat") return TerrainKind::kFlat;
  if (s == "stochastic_stairs") return TerrainKind::kStochasticStairs;
  if (s == "inclined") return TerrainKind::kInclined;
  if (s == "disjointed") return TerrainKind::kDisjointed;
  throw ConfigError("unknown terrain kind: " + s);
}

const char* to_string(TerrainKind k) {
  switch (k) {
    case TerrainKind::kFlat: return "flat";
    case TerrainKind::kStochasticStairs: return "stochastic_stairs";
    case TerrainKind::kInclined: return "inclined";
    case TerrainKind::kDisjointed: return "disjointed";
  }
  return "unknown";
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parseNumber(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (trim(v.substr(used)).empty()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": cannot parse number '" + v + "'");
}

std::pair<double, double> parsePair(const std::string& key,
                                    const std::string& raw) {
  std::string v = trim(raw);
  if (v.size() >= 2 && (v.front() == '[' || v.front() == '(') &&
      (v.back() == ']' || v.back() == ')')) {
    v = v.substr(1, v.size() - 2);
  }
  const auto comma = v.find(',');
  if (comma == std::string::npos) {
    throw ConfigError(key + ": expected a pair '[a, b]', got '" + raw + "'");
  }
  return {parseNumber(key, trim(v.substr(0, comma))),
          parseNumber(key, trim(v.substr(comma + 1)))};
}

Disturbance parseDisturbance(const std::string& raw) {
  // "<zeta>:<dvx>,<dvy>"
  const auto colon = raw.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("disturbance: expected '<zeta>:<dvx>,<dvy>', got '" +
                      raw + "'");
  }
  Disturbance d;
  d.trigger = Disturbance::Trigger::kZeta;
  d.at = parseNumber("disturbance", trim(raw.substr(0, colon)));
  const std::string rest = trim(raw.substr(colon + 1));
  const auto comma = rest.find(',');
  if (comma == std::string::npos) {
    d.dvx = parseNumber("disturbance", rest);
  } else {
    d.dvx = parseNumber("disturbance", trim(rest.substr(0, comma)));
    d.dvy = parseNumber("disturbance", trim(rest.substr(comma + 1)));
  }
  return d;
}

}  // namespace

ScenarioConfig loadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);

  ScenarioConfig cfg;
  cfg.cache_dir = std::filesystem::path(path).parent_path().string();
  if (cfg.cache_dir.empty()) cfg.cache_dir = ".";

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": expected 'key = value'";
      throw ConfigError(msg.str());
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": empty key or value";
      throw ConfigError(msg.str());
    }

    if (key == "config_version") {
      cfg.config_version = static_cast<int>(parseNumber(key, value));
    } else if (key == "terrain") {
      cfg.terrain.kind = terrainKindFromString(value);
    } else if (key == "dh_min") {
      cfg.terrain.dh_min = parseNumber(key, value);
    } else if (key == "dh_max") {
      cfg.terrain.dh_max = parseNumber(key, value);
    } else if (key == "tilt_deg") {
      cfg.terrain.tilt_deg = parseNumber(key, value);
    } else if (key == "step_length") {
      cfg.terrain.step_length = parseNumber(key, value);
    } else if (key == "gap") {
      cfg.terrain.gap = parseNumber(key, value);
    } else if (key == "seed") {
      cfg.terrain.seed = static_cast<std::uint64_t>(parseNumber(key, value));
    } else if (key == "n_steps") {
      cfg.n_steps = static_cast<int>(parseNumber(key, value));
    } else if (key == "hip_width") {
      cfg.hip_width = parseNumber(key, value);
    } else if (key == "apex_speed" || key == "x_dot_apex") {
      cfg.keyframe.base_apex_speed = parseNumber(key, value);
    } else if (key == "terrain_gain") {
      cfg.keyframe.terrain_gain = parseNumber(key, value);
    } else if (key == "heading_increment_deg") {
      cfg.heading_increment =
          parseNumber(key, value) * std::numbers::pi / 180.0;
    } else if (key == "mass" || key == "m") {
      cfg.robot.mass = parseNumber(key, value);
    } else if (key == "gravity" || key == "g") {
      cfg.robot.gravity = parseNumber(key, value);
    } else if (key == "z_apex") {
      cfg.apex_height = parseNumber(key, value);
    } else if (key == "epsilon") {
      cfg.bundle.epsilon = parseNumber(key, value);
    } else if (key == "zeta_trans") {
      cfg.bundle.zeta_trans = parseNumber(key, value);
    } else if (key == "stage_range") {
      std::tie(cfg.dp.stage_min, cfg.dp.stage_max) = parsePair(key, value);
    } else if (key == "state_range") {
      std::tie(cfg.dp.state_min, cfg.dp.state_max) = parsePair(key, value);
    } else if (key == "stage_resolution" || key == "stage_res") {
      cfg.dp.stage_res = parseNumber(key, value);
    } else if (key == "state_resolution" || key == "state_res") {
      cfg.dp.state_res = parseNumber(key, value);
    } else if (key == "omega_range") {
      std::tie(cfg.dp.omega_min, cfg.dp.omega_max) = parsePair(key, value);
    } else if (key == "tau_y_range" || key == "tau_range") {
      std::tie(cfg.dp.tau_min, cfg.dp.tau_max) = parsePair(key, value);
    } else if (key == "omega_ref") {
      cfg.dp.omega_ref = parseNumber(key, value);
    } else if (key == "tau_y_ref") {
      cfg.dp.tau_ref = parseNumber(key, value);
    } else if (key == "omega_count") {
      cfg.dp.omega_count = static_cast<int>(parseNumber(key, value));
    } else if (key == "tau_count") {
      cfg.dp.tau_count = static_cast<int>(parseNumber(key, value));
    } else if (key == "alpha") {
      cfg.dp.alpha = parseNumber(key, value);
    } else if (key == "beta") {
      cfg.dp.beta = parseNumber(key, value);
    } else if (key == "Gamma_1" || key == "gamma1") {
      cfg.dp.gamma1 = parseNumber(key, value);
    } else if (key == "Gamma_2" || key == "gamma2") {
      cfg.dp.gamma2 = parseNumber(key, value);
    } else if (key == "eta") {
      cfg.dp.eta = parseNumber(key, value);
    } else if (key == "x_foot") {
      cfg.dp_anchor = parseNumber(key, value);
    } else if (key == "s_initial") {
      cfg.s_initial = parsePair(key, value);
    } else if (key == "dt") {
      cfg.planner.dt = parseNumber(key, value);
      cfg.walk.dt = cfg.planner.dt;
    } else if (key == "guard") {
      cfg.walk.guard_kind = guardKindFromString(value);
    } else if (key == "multicontact_fraction") {
      cfg.planner.multicontact_fraction = parseNumber(key, value);
      cfg.walk.enable_multicontact = cfg.planner.multicontact_fraction > 0.0;
    } else if (key == "min_apex_speed") {
      cfg.planner.min_apex_speed = parseNumber(key, value);
    } else if (key == "max_step_length") {
      cfg.planner.max_step_length = parseNumber(key, value);
    } else if (key == "internal_force") {
      cfg.internal_force = parseNumber(key, value);
    } else if (key == "replan_demo_dv") {
      std::tie(cfg.replan_demo_dv_small, cfg.replan_demo_dv_large) =
          parsePair(key, value);
    } else if (key == "disturbance") {
      cfg.disturbances.push_back(parseDisturbance(value));
    } else if (key == "out_dir") {
      cfg.out_dir = value;
    } else if (key == "cache_dir") {
      cfg.cache_dir = value;
    } else {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": unknown key '" << key << "'";
      throw ConfigError(msg.str());
    }
  }

  if (cfg.config_version != 1) {
    throw ConfigError("unsupported config_version in " + path);
  }
  if (cfg.n_steps < 1) throw ConfigError("n_steps must be at least 1");
  if (!(cfg.terrain.dh_min < cfg.terrain.dh_max)) {
    throw ConfigError("dh_min must be below dh_max");
  }
  cfg.walk.bundle = cfg.bundle;
  std::sort(cfg.disturbances.begin(), cfg.disturbances.end(),
            [](const Disturbance& a, const Disturbance& b) {
              return a.at < b.at;
            });
  return cfg;
}

}  // namespace phasewalk
