#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <toml.hpp>

#include "wildfire/sim_harness.hpp"

namespace wildfire {

const char* to_string(ControlMode m) {
  switch (m) {
    case ControlMode::kNone: return "none";
    case ControlMode::kCentralized: return "centralized";
    case ControlMode::kDecentralized: return "decentralized";
  }
  return "?";
}

ControlMode parse_mode(const std::string& s) {
  if (s == "none") return ControlMode::kNone;
  if (s == "centralized") return ControlMode::kCentralized;
  if (s == "decentralized") return ControlMode::kDecentralized;
  throw ConfigError("unknown controller mode '" + s + "'");
}

long SimConfig::ticks() const { return std::lround(horizon / dt); }

SimConfig default_config() {
  SimConfig c;
  FireParams& f = c.fire.params;
  f.eta = 0.002;
  f.A_gain = 2.0;
  f.C_c = 0.1;
  f.T_a = 300.0;
  f.gamma_arr = 2.0;
  f.C_s = 0.09;
  c.fire.centers = {{-0.3, 0.4}, {-0.1, 0.0}, {0.5, -0.4}};
  c.fire.thresholds = {300.5, 302.5, 301.0};
  c.charger = {{-1.2, -1.2}, 0.5};

  ControllerConfig& k = c.control;
  k.gains = {1.0, 2.0, 1.0, 200.0, 0.05, 0.05};
  k.density = {0.03, 0.001, 0.5};
  k.water = {2.0, 10.0, 0.5, true};
  k.energy = {0.1, 0.05, 0.1, 0.3};
  k.sigma_s = 0.3;
  k.dt = c.dt;
  k.energy_margin = 0.1;
  c.safety_margin = 0.25;
  return c;
}

void SimConfig::validate() const {
  const GridSpec g = grid();
  g.validate();
  if (!(dt > 0.0)) throw ConfigError("config: dt must be positive");
  if (!(horizon >= 0.0)) throw ConfigError("config: horizon must be non-negative");
  if (std::abs(control.dt - dt) > 1e-15) throw ConfigError("config: controller dt differs from the simulation dt");
  fire.params.validate();
  fire.thresholds.validate(fire.params.T_a);
  for (Vec2 c : fire.centers)
    if (!g.contains(c)) throw ConfigError("config: fire center outside the domain");
  if (!(fire.radius > 0.0) || !(fire.peak_excess >= 0.0)) throw ConfigError("config: bad ignition shape");
  FireParams with_wind = fire.params;
  with_wind.wind = VectorField(g, fire.wind);
  check_fire_stability(g, with_wind, dt);
  charger.validate(g);
  if (robots < 0) throw ConfigError("config: robots must be non-negative");
  control.validate();
  if (!(target_gain >= 0.0) || !(target_mass > 0.0)) throw ConfigError("config: bad target scaling");
  if (!(safety_margin >= 0.0)) throw ConfigError("config: safety_margin must be non-negative");
  if (!(detection_radius >= 0.0) || !(comm_radius >= 0.0) || !(decay_rate >= 0.0)) throw ConfigError("config: bad knowledge parameters");
  planner.validate();
  if (replan_every < 1 || !(r_proj > 0.0) || !(neighbor_horizon >= 0.0) || !(planner_alpha > 0.0))
    throw ConfigError("config: bad replanning parameters");
  if (!(dock_release > 0.0 && dock_release <= 1.0)) throw ConfigError("config: dock_release must lie in (0, 1]");
  if (!(0.0 <= E0_min && E0_min <= E0_max && E0_max <= 1.0)) throw ConfigError("config: bad initial battery range");
  if (!(spawn_clearance >= 0.0 && spawn_max_distance > spawn_clearance))
    throw ConfigError("config: bad spawn annulus");
  if (threads < 1) throw ConfigError("config: threads must be positive");
  if (snapshot_every < 0) throw ConfigError("config: snapshot_every must be non-negative");
}

namespace {

std::string fmt(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  std::string s(buf.data(), res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string fmt(Vec2 v) { return "[" + fmt(v.x) + ", " + fmt(v.y) + "]"; }

double as_double(const toml::node& n, const std::string& key) {
  if (auto v = n.value<double>()) return *v;
  throw ConfigError("config: '" + key + "' must be a number");
}

Vec2 as_vec2(const toml::node& n, const std::string& key) {
  const toml::array* a = n.as_array();
  if (!a || a->size() != 2) throw ConfigError("config: '" + key + "' must be a 2-element array");
  return {as_double(*a->get(0), key), as_double(*a->get(1), key)};
}

// Origins: "scenario" values define the simulated setup, "calibrated"
// values were tuned here (see README), "assumed" are modelling choices.
struct Field {
  const char* section;
  const char* key;
  const char* origin;
  std::function<void(const toml::node&, const std::string&)> read;
  std::function<std::string()> write;
};

Field num(const char* s, const char* k, const char* o, double& ref) {
  return {s, k, o, [&ref](const toml::node& n, const std::string& key) { ref = as_double(n, key); },
          [&ref] { return fmt(ref); }};
}

Field integer(const char* s, const char* k, const char* o, int& ref) {
  return {s, k, o,
          [&ref](const toml::node& n, const std::string& key) {
            auto v = n.value<std::int64_t>();
            if (!v) throw ConfigError("config: '" + key + "' must be an integer");
            ref = static_cast<int>(*v);
          },
          [&ref] { return std::to_string(ref); }};
}

Field flag(const char* s, const char* k, const char* o, bool& ref) {
  return {s, k, o,
          [&ref](const toml::node& n, const std::string& key) {
            auto v = n.value<bool>();
            if (!v) throw ConfigError("config: '" + key + "' must be a boolean");
            ref = *v;
          },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

Field vec(const char* s, const char* k, const char* o, Vec2& ref) {
  return {s, k, o, [&ref](const toml::node& n, const std::string& key) { ref = as_vec2(n, key); },
          [&ref] { return fmt(ref); }};
}

std::vector<Field> fields(SimConfig& c) {
  FireParams& f = c.fire.params;
  ControllerConfig& k = c.control;
  std::vector<Field> out = {
      num("domain", "side", "scenario", c.side),
      num("domain", "h", "scenario", c.h),
      num("domain", "dt", "scenario", c.dt),
      num("domain", "horizon", "scenario", c.horizon),

      num("fire", "eta", "calibrated", f.eta),
      num("fire", "A_gain", "calibrated", f.A_gain),
      num("fire", "C_c", "calibrated", f.C_c),
      num("fire", "T_a", "assumed", f.T_a),
      num("fire", "gamma_arr", "calibrated", f.gamma_arr),
      num("fire", "C_s", "calibrated", f.C_s),
      vec("fire", "wind", "assumed", c.fire.wind),
      {"fire", "centers", "scenario",
       [&c](const toml::node& n, const std::string& key) {
         const toml::array* a = n.as_array();
         if (!a) throw ConfigError("config: '" + key + "' must be an array of points");
         c.fire.centers.clear();
         for (const toml::node& p : *a) c.fire.centers.push_back(as_vec2(p, key));
       },
       [&c] {
         std::string s = "[";
         for (std::size_t i = 0; i < c.fire.centers.size(); ++i) s += (i ? ", " : "") + fmt(c.fire.centers[i]);
         return s + "]";
       }},
      num("fire", "peak_excess", "calibrated", c.fire.peak_excess),
      num("fire", "radius", "calibrated", c.fire.radius),
      num("fire", "T_low", "calibrated", c.fire.thresholds.T_low),
      num("fire", "T_high", "calibrated", c.fire.thresholds.T_high),
      num("fire", "T_ignite", "calibrated", c.fire.thresholds.T_ignite),

      vec("charger", "center", "scenario", c.charger.center),
      num("charger", "radius", "scenario", c.charger.radius),
      num("charger", "dock_release", "assumed", c.dock_release),

      integer("team", "robots", "assumed", c.robots),
      {"team", "mode", "assumed",
       [&c](const toml::node& n, const std::string& key) {
         auto v = n.value<std::string>();
         if (!v) throw ConfigError("config: '" + key + "' must be a string");
         c.mode = parse_mode(*v);
       },
       [&c] { return "\"" + std::string(to_string(c.mode)) + "\""; }},
      num("team", "E0_min", "assumed", c.E0_min),
      num("team", "E0_max", "assumed", c.E0_max),
      num("team", "spawn_clearance", "assumed", c.spawn_clearance),
      num("team", "spawn_max_distance", "assumed", c.spawn_max_distance),

      num("density", "sigma_loc", "calibrated", k.density.sigma_loc),
      num("density", "diffusion_T", "calibrated", k.density.diffusion_T),
      num("density", "u_max", "assumed", k.density.u_max),

      num("water", "f_max", "calibrated", k.water.f_max),
      num("water", "tank_capacity", "calibrated", k.water.tank_capacity),
      num("water", "refill_rate", "calibrated", k.water.refill_rate),
      flag("water", "refill_at_charger", "assumed", k.water.refill_at_charger),
      num("water", "sigma_s", "calibrated", k.sigma_s),
      num("water", "target_gain", "assumed", c.target_gain),
      num("water", "target_mass", "assumed", c.target_mass),

      num("energy", "c1", "calibrated", k.energy.c1),
      num("energy", "c2", "calibrated", k.energy.c2),
      num("energy", "E_min", "assumed", k.energy.E_min),
      num("energy", "r_charge", "calibrated", k.energy.r_charge),
      num("energy", "margin", "calibrated", k.energy_margin),

      num("controller", "alpha_v", "calibrated", k.gains.alpha_v),
      num("controller", "alpha_h", "calibrated", k.gains.alpha_h),
      num("controller", "alpha_E", "calibrated", k.gains.alpha_E),
      num("controller", "gamma", "calibrated", k.gains.gamma),
      num("controller", "zeta", "calibrated", k.gains.zeta),
      num("controller", "epsilon", "calibrated", k.gains.epsilon),
      num("controller", "safety_margin", "calibrated", c.safety_margin),

      flag("collision", "enabled", "assumed", k.collision.enabled),
      num("collision", "r_coll", "scenario", k.collision.r_coll),
      num("collision", "alpha_c", "assumed", k.collision.alpha_c),

      num("knowledge", "detection_radius", "scenario", c.detection_radius),
      num("knowledge", "comm_radius", "assumed", c.comm_radius),
      num("knowledge", "decay_rate", "assumed", c.decay_rate),

      num("planner", "u_plan", "assumed", c.planner.u_plan),
      num("planner", "step_time", "assumed", c.planner.step_time),
      integer("planner", "max_nodes", "assumed", c.planner.max_nodes),
      num("planner", "goal_bias", "assumed", c.planner.goal_bias),
      integer("planner", "replan_every", "assumed", c.replan_every),
      num("planner", "r_proj", "assumed", c.r_proj),
      num("planner", "neighbor_horizon", "assumed", c.neighbor_horizon),
      num("planner", "alpha", "assumed", c.planner_alpha),

      num("solver", "tol", "assumed", k.solver.tol),
      integer("solver", "max_iter", "assumed", k.solver.max_iter),

      {"run", "seed", "assumed",
       [&c](const toml::node& n, const std::string& key) {
         auto v = n.value<std::int64_t>();
         if (!v || *v < 0) throw ConfigError("config: '" + key + "' must be a non-negative integer");
         c.seed = static_cast<std::uint64_t>(*v);
       },
       [&c] { return std::to_string(c.seed); }},
      integer("run", "threads", "assumed", c.threads),
      integer("run", "snapshot_every", "assumed", c.snapshot_every),
      flag("run", "dump_programs", "assumed", c.dump_programs),
  };
  return out;
}

}  // namespace

SimConfig parse_config(const std::string& toml_text) {
  SimConfig c = default_config();
  toml::table tbl;
  try {
    tbl = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string("config: ") + std::string(e.description()));
  }
  std::set<std::string> known;
  for (Field& f : fields(c)) {
    const std::string key = std::string(f.section) + "." + f.key;
    known.insert(key);
    if (const toml::node* n = tbl.at_path(key).node()) f.read(*n, key);
  }
  for (const auto& [section, node] : tbl) {
    const toml::table* t = node.as_table();
    if (!t) throw ConfigError("config: top-level key '" + std::string(section.str()) + "' is not a section");
    for (const auto& [key, value] : *t) {
      const std::string full = std::string(section.str()) + "." + std::string(key.str());
      if (!known.count(full)) throw ConfigError("config: unknown key '" + full + "'");
    }
  }
  c.control.dt = c.dt;
  c.planner.u_plan = std::min(c.planner.u_plan, c.control.density.u_max);
  c.validate();
  return c;
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_toml(const SimConfig& cfg) {
  SimConfig c = cfg;
  std::ostringstream out;
  out << "# Origins: scenario = part of the scenario definition, calibrated = tuned in\n"
         "# this repository, assumed = modelling choice.\n";
  std::string section;
  for (Field& f : fields(c)) {
    if (section != f.section) {
      section = f.section;
      out << "\n[" << section << "]\n";
    }
    out << f.key << " = " << f.write() << "  # " << f.origin << "\n";
  }
  return out.str();
}

}  // namespace wildfire
