#include "wildfire/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "wildfire/task_functions.hpp"

namespace wildfire {

namespace {

std::size_t idx(int k) { return static_cast<std::size_t>(k); }

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t plan_seed(std::uint64_t seed, long tick, int robot) {
  return mix(mix(mix(seed) ^ static_cast<std::uint64_t>(tick)) ^ static_cast<std::uint64_t>(robot));
}

template <class F>
void parallel_for(int n, int threads, F&& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (int i = t; i < n; i += threads) fn(i);
    });
  for (auto& th : pool) th.join();
}

std::string stamp(double t) {
  std::ostringstream s;
  s.precision(10);
  s << "t=" << t << ' ';
  return s.str();
}

void log_event(World& w, double t, const std::string& text, std::string* tick_events) {
  w.events.push_back(stamp(t) + text);
  if (tick_events) {
    if (!tick_events->empty()) *tick_events += ';';
    *tick_events += text;
  }
}

FireParams fire_params(const SimConfig& cfg, const GridSpec& g) {
  FireParams p = cfg.fire.params;
  p.wind = VectorField(g, cfg.fire.wind);
  return p;
}

double min_center_distance(Vec2 p, const std::vector<Vec2>& centers) {
  double best = std::numeric_limits<double>::infinity();
  for (Vec2 c : centers) best = std::min(best, distance(p, c));
  return best;
}

// Merge of every robot's map: per cell, the most certain estimate.
ScalarField fused_estimate(const std::vector<RobotState>& robots, const GridSpec& g, double T_a) {
  ScalarField T(g, T_a);
  std::vector<double> best(g.size(), 0.0);
  for (const RobotState& r : robots)
    for (std::size_t k = 0; k < g.size(); ++k)
      if (r.map.certainty[k] > best[k]) {
        best[k] = r.map.certainty[k];
        T[k] = r.map.T_est[k];
      }
  return T;
}

// Cells within `radius` of a path polyline are checked against `near`.
bool path_touches(const ChargePath& path, const CellMask& near) {
  const GridSpec& g = near.spec();
  auto hit = [&](Vec2 p) {
    if (!g.contains(p)) return false;
    const auto c = g.cell_of(p);
    return near(c[0], c[1]);
  };
  const auto& w = path.waypoints;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (hit(w[k])) return true;
    if (k + 1 == w.size()) break;
    const double len = distance(w[k], w[k + 1]);
    const int n = static_cast<int>(std::ceil(len / (0.5 * g.h)));
    for (int s = 1; s < n; ++s)
      if (hit(w[k] + (static_cast<double>(s) / n) * (w[k + 1] - w[k]))) return true;
  }
  return false;
}

ChargePath straight_path(Vec2 x, const ChargerRegion& charger, const SimConfig& cfg) {
  ChargePath p;
  p.u_plan = cfg.planner.u_plan;
  p.e_rate = cfg.control.energy.rate_per_metre(p.u_plan);
  p.waypoints = {x};
  if (!charger.contains(x)) p.waypoints.push_back(charger.center);
  p.P = p.e_rate * p.length();
  return p;
}

double team_h_s(const std::vector<RobotBelief>& beliefs, const CellMask& unsafe, const SimConfig& cfg) {
  if (beliefs.empty()) return cfg.control.gains.epsilon;
  std::vector<const RobotBelief*> ptrs;
  for (const auto& b : beliefs) ptrs.push_back(&b);
  return safety_cbf_eval(ptrs, unsafe, cfg.control.gains.epsilon, cfg.control.density.diffusion_T).h;
}

MetricsRecord base_metrics(const World& w, const std::vector<RobotBelief>& beliefs, const CellMask& unsafe) {
  const SimConfig& cfg = w.cfg;
  MetricsRecord m;
  m.tick = w.tick;
  m.t = static_cast<double>(w.tick) * cfg.dt;
  m.A_f = fire_area(w.fire.T, cfg.fire.thresholds);
  m.min_h_s = team_h_s(beliefs, unsafe, cfg);
  if (w.robots.empty()) {
    m.mean_E = m.min_E = 1.0;
    m.min_h_E = 1.0;
    return m;
  }
  m.min_E = m.min_h_E = std::numeric_limits<double>::infinity();
  for (const RobotState& r : w.robots) {
    m.mean_E += r.E;
    m.min_E = std::min(m.min_E, r.E);
    const double P = r.has_path ? r.path.P : 0.0;
    m.min_h_E = std::min(m.min_h_E, r.E - cfg.control.energy.E_min - P);
    m.water += r.w;
  }
  m.mean_E /= static_cast<double>(w.robots.size());
  return m;
}

}  // namespace

World make_world(const SimConfig& cfg) {
  cfg.validate();
  World w;
  w.cfg = cfg;
  w.grid = cfg.grid();
  w.fire = ignite(w.grid, cfg.fire.params.T_a, cfg.fire.centers, cfg.fire.peak_excess, cfg.fire.radius);
  w.last_unsafe = unsafe_region(w.fire.T, cfg.fire.thresholds);
  w.rng.seed(mix(cfg.seed));

  // Spawn in an annulus around the fires, clear of the unsafe set and the charger.
  const CellMask keep_out = dilate(w.last_unsafe, cfg.safety_margin + 4.0 * cfg.control.density.sigma_loc);
  std::uniform_real_distribution<double> ux(w.grid.lower().x, w.grid.upper().x);
  std::uniform_real_distribution<double> uy(w.grid.lower().y, w.grid.upper().y);
  std::uniform_real_distribution<double> ue(cfg.E0_min, cfg.E0_max);
  for (int i = 0; i < cfg.robots; ++i) {
    Vec2 p;
    const double E0 = ue(w.rng);
    for (int attempt = 0;; ++attempt) {
      if (attempt > 100000) throw ConfigError("config: no admissible spawn position");
      p = {ux(w.rng), uy(w.rng)};
      const double dc = min_center_distance(p, cfg.fire.centers);
      if (dc < cfg.spawn_clearance || dc > cfg.spawn_max_distance) continue;
      if (cfg.charger.contains(p)) continue;
      const auto c = w.grid.cell_of(p);
      if (keep_out(c[0], c[1])) continue;
      // Start inside the energy safe set, with room for the controller margin
      // and a detour around the fire.
      const double P = straight_path(p, cfg.charger, cfg).P;
      if (E0 - cfg.control.energy.E_min - cfg.control.energy_margin - 1.5 * P <= 0.0) continue;
      break;
    }
    RobotState r;
    r.x_true = r.x_meas = r.x_belief = p;
    r.E = r.E0 = E0;
    r.w = 1.0;
    r.map = LocalMap(w.grid, cfg.fire.params.T_a);
    r.path = straight_path(p, cfg.charger, cfg);
    w.robots.push_back(std::move(r));
  }
  w.target_gain = cfg.target_gain;
  if (w.target_gain == 0.0) {
    const double band = integrate(target_density(w.fire.T, cfg.fire.thresholds, 1.0));
    w.target_gain = band > 0.0 ? cfg.target_mass * std::max(cfg.robots, 1) / band : 1.0;
  }
  return w;
}

MetricsRecord observe(const World& w) {
  std::vector<RobotBelief> beliefs;
  for (const RobotState& r : w.robots) beliefs.push_back(make_belief(r.x_belief, w.cfg.control.density, w.grid));
  return base_metrics(w, beliefs, unsafe_region(w.fire.T, w.cfg.fire.thresholds));
}

MetricsRecord step(World& w, StepTrace* trace) {
  const SimConfig& cfg = w.cfg;
  const GridSpec& g = w.grid;
  const int n = static_cast<int>(w.robots.size());
  const double dt = cfg.dt;
  const double t_end = static_cast<double>(w.tick + 1) * dt;
  const double T_a = cfg.fire.params.T_a;
  std::string tick_events;
  int plan_failures = 0;

  // (1) measured positions
  const double sl = cfg.control.density.sigma_loc;
  std::normal_distribution<double> loc(0.0, sl > 0.0 ? sl : 1.0);
  for (RobotState& r : w.robots) {
    Vec2 noise;
    if (sl > 0.0) noise = {loc(w.rng), loc(w.rng)};
    r.x_meas = g.clamp(r.x_true + noise);
  }

  // (2) knowledge: sense, decay, one-hop share, unsafe broadcast
  std::vector<Vec2> true_pos, meas_pos;
  for (const RobotState& r : w.robots) {
    true_pos.push_back(r.x_true);
    meas_pos.push_back(r.x_meas);
  }
  const NeighborGraph graph = neighbor_graph(true_pos, cfg.comm_radius);
  std::vector<LocalMap> maps(idx(n));
  parallel_for(n, cfg.threads, [&](int i) {
    RobotState& r = w.robots[idx(i)];
    maps[idx(i)] = sense(decay(std::move(r.map), dt, cfg.decay_rate, T_a), w.fire.T, r.x_true, cfg.detection_radius);
  });
  maps = share_one_hop(maps, graph);
  for (int i = 0; i < n; ++i) w.robots[idx(i)].map = std::move(maps[idx(i)]);
  const CellMask unsafe = broadcast_unsafe(w.fire.T, cfg.fire.thresholds);
  const CellMask guarded = cfg.safety_margin > 0.0 ? dilate(unsafe, cfg.safety_margin) : unsafe;
  const bool unsafe_changed = !(unsafe == w.last_unsafe);

  std::vector<RobotBelief> beliefs(idx(n));
  parallel_for(n, cfg.threads,
               [&](int i) { beliefs[idx(i)] = make_belief(meas_pos[idx(i)], cfg.control.density, g); });

  // Docking: parked robots fly to the charger center and skip the controllers.
  const bool controlled = cfg.mode != ControlMode::kNone;
  const WaterParams& wp = cfg.control.water;
  const bool refills = wp.refill_at_charger && wp.refill_rate > 0.0;
  std::vector<int> active;
  for (int i = 0; i < n; ++i) {
    RobotState& r = w.robots[idx(i)];
    const bool topped = r.E >= cfg.dock_release && (!refills || r.w >= cfg.dock_release);
    if (controlled && !r.docked && !topped && cfg.charger.contains(r.x_meas)) {
      r.docked = true;
      ++r.charger_visits;
      log_event(w, t_end, "dock robot=" + std::to_string(i), &tick_events);
    } else if (r.docked && topped) {
      r.docked = false;
      r.plan_age = cfg.replan_every;
      log_event(w, t_end, "undock robot=" + std::to_string(i), &tick_events);
    }
    if (!r.docked) active.push_back(i);
  }

  // Charge paths, re-anchored at the measured position; replanned on a
  // cadence, on a large offset, or when the unsafe set reaches the path.
  std::vector<char> plan_failed(idx(n), 0);
  if (controlled && n > 0) {
    const CellMask near = dilate(guarded, sl);
    ScalarField team(g, 0.0);
    for (const auto& b : beliefs) team += b.field();
    std::vector<std::string> notes(idx(n));
    parallel_for(n, cfg.threads, [&](int i) {
      RobotState& r = w.robots[idx(i)];
      const PathAdvance adv = path_advance(r.path, r.x_meas, cfg.charger, cfg.r_proj);
      r.path = adv.path;
      ++r.plan_age;
      const bool inside = r.docked || cfg.charger.contains(r.x_meas);
      const bool forced = !r.has_path || adv.replan || (unsafe_changed && path_touches(r.path, near));
      const bool replan = forced || r.plan_age >= cfg.replan_every;
      if (inside) {
        r.has_path = true;
        r.plan_age = 0;
        return;
      }
      if (!replan) return;
      PlannerSafety safety;
      safety.unsafe = &guarded;
      safety.epsilon = cfg.control.gains.epsilon;
      safety.alpha = cfg.planner_alpha;
      safety.density = cfg.control.density;
      safety.neighbor_horizon = cfg.neighbor_horizon;
      if (cfg.mode == ControlMode::kCentralized) {
        safety.fixed = team;
        safety.fixed -= beliefs[idx(i)].field();
      } else {
        safety.fixed = ScalarField(g, 0.0);
        for (int j : graph.adjacency[idx(i)])
          safety.neighbors.push_back({meas_pos[idx(j)], w.robots[idx(j)].last_u});
      }
      auto plan = rrt_plan(r.x_meas, cfg.charger, safety, g, cfg.planner, cfg.control.energy,
                           plan_seed(cfg.seed, w.tick, i));
      r.plan_age = 0;
      if (plan) {
        // A routine replan only switches to a shorter path, so the random
        // planner cannot flip the robot between detours around the fire.
        if (forced || plan->length() < r.path.length()) r.path = std::move(*plan);
        r.has_path = true;
      } else if (!forced) {
        // The current path is still valid; keep it.
      } else {
        plan_failed[idx(i)] = 1;
        if (!r.has_path) r.path = straight_path(r.x_meas, cfg.charger, cfg);
        notes[idx(i)] = "plan_failure robot=" + std::to_string(i);
      }
    });
    for (int i = 0; i < n; ++i) {
      if (plan_failed[idx(i)]) {
        ++plan_failures;
        log_event(w, t_end, notes[idx(i)], &tick_events);
      }
    }
  } else {
    for (RobotState& r : w.robots) r.path = path_advance(r.path, r.x_meas, cfg.charger, cfg.r_proj).path;
  }

  // (3) controllers on the measured state
  std::vector<RobotView> views(idx(n));
  for (int i = 0; i < n; ++i) {
    const RobotState& r = w.robots[idx(i)];
    views[idx(i)] = {i, &beliefs[idx(i)], r.E, r.w, &r.path, cfg.charger.contains(r.x_meas), r.last_u};
  }
  std::vector<ControlCommand> cmds(idx(n));
  for (int i = 0; i < n; ++i) {
    ControlCommand& c = cmds[idx(i)];
    c.robot = i;
    if (!w.robots[idx(i)].docked) continue;
    const Vec2 d = cfg.charger.center - meas_pos[idx(i)];
    const double len = norm(d);
    if (len > 0.0) c.u = (std::min(cfg.planner.u_plan, len / dt) / len) * d;
    c.active = "dock";
  }
  const int n_active = static_cast<int>(active.size());
  int solves = 0;
  double solve_sum = 0.0;
  ScalarField global_target;
  if (cfg.mode == ControlMode::kCentralized || trace || cfg.snapshot_every > 0)
    global_target = target_density(fused_estimate(w.robots, g, T_a), cfg.fire.thresholds, w.target_gain);
  if (cfg.mode == ControlMode::kCentralized && n_active > 0) {
    std::vector<RobotView> sub;
    for (int i : active) sub.push_back(views[idx(i)]);
    const std::vector<ControlCommand> out = centralized_step(sub, global_target, guarded, cfg.control);
    for (std::size_t k = 0; k < active.size(); ++k) cmds[idx(active[k])] = out[k];
    solves = 1;
    solve_sum = out[0].solve_time;
    if (trace && trace->want_programs)
      trace->programs.push_back(program_json(centralized_program(sub, global_target, guarded, cfg.control)));
  } else if (cfg.mode == ControlMode::kDecentralized && n_active > 0) {
    std::vector<std::string> programs(idx(n_active));
    parallel_for(n_active, cfg.threads, [&](int k) {
      const int i = active[idx(k)];
      std::vector<RobotView> nbrs;
      for (int j : graph.adjacency[idx(i)]) nbrs.push_back(views[idx(j)]);
      const ScalarField rho_d = target_density(w.robots[idx(i)].map.T_est, cfg.fire.thresholds, w.target_gain);
      cmds[idx(i)] = decentralized_step(views[idx(i)], nbrs, rho_d, guarded, cfg.control);
      if (trace && trace->want_programs)
        programs[idx(k)] = program_json(decentralized_program(views[idx(i)], nbrs, rho_d, guarded, cfg.control));
    });
    for (int i : active) solve_sum += cmds[idx(i)].solve_time;
    solves = n_active;
    if (trace && trace->want_programs)
      for (auto& p : programs) trace->programs.push_back(std::move(p));
  }
  if (controlled) {
    for (int i : active) {
      if (plan_failed[idx(i)]) {
        ControlCommand fb = fallback_command(views[idx(i)]);
        fb.solve_time = cmds[idx(i)].solve_time;
        fb.iterations = cmds[idx(i)].iterations;
        fb.status = cmds[idx(i)].status;
        cmds[idx(i)] = fb;
      }
    }
    cmds = collision_filter(std::move(cmds), meas_pos, cfg.control.collision, cfg.control.density.u_max);
  }

  MetricsRecord m;
  int fallbacks = 0;
  double slack = 0.0;
  for (int i = 0; i < n; ++i) {
    const ControlCommand& c = cmds[idx(i)];
    slack = std::max(slack, c.slack);
    if (c.fallback) {
      ++fallbacks;
      if (!plan_failed[idx(i)])
        log_event(w, t_end, "fallback robot=" + std::to_string(i) + " status=" + to_string(c.status), &tick_events);
    }
  }

  // (4)-(5) motion, battery and water
  const double Td = cfg.control.density.diffusion_T;
  std::normal_distribution<double> motion(0.0, Td > 0.0 ? std::sqrt(2.0 * Td * dt) : 1.0);
  const EnergyParams& ep = cfg.control.energy;
  std::vector<Sprayer> sprayers;
  for (int i = 0; i < n; ++i) {
    RobotState& r = w.robots[idx(i)];
    const ControlCommand& c = cmds[idx(i)];
    const double f = admissible_flow(c.f, r.w, cfg.control.water);
    Vec2 noise;
    if (Td > 0.0) noise = {motion(w.rng), motion(w.rng)};
    r.x_true = g.clamp(r.x_true + dt * c.u + noise);
    r.x_belief = g.clamp(r.x_meas + dt * c.u);

    r.in_charger = cfg.charger.contains(r.x_true);
    const double drain = (ep.c1 * dot(c.u, c.u) + ep.c2) * dt;
    const double gain = r.in_charger ? ep.r_charge * dt : 0.0;
    const double raw = r.E - drain + gain;
    const double E_new = std::clamp(raw, 0.0, 1.0);
    if (raw > 1.0) {
      r.drained += drain;
      r.charged += gain - (raw - 1.0);
    } else if (raw < 0.0) {
      r.drained += r.E + gain;
      r.charged += gain;
    } else {
      r.drained += drain;
      r.charged += gain;
    }
    r.E = E_new;
    r.w = water_update(r.w, f, dt, r.in_charger, cfg.control.water);
    r.last_u = c.u;
    r.last_f = f;
    if (f > 0.0) sprayers.push_back({r.x_meas, f});
  }

  // (6) fire
  const ScalarField u_s = suppression_field(sprayers, cfg.control.sigma_s, g);
  w.fire = fire_step(w.fire, fire_params(cfg, g), u_s, dt, &w.clamps);
  w.last_unsafe = unsafe;
  ++w.tick;
  w.last_commands = cmds;

  // (7) propagated beliefs and metrics
  std::vector<RobotBelief> after(idx(n));
  for (int i = 0; i < n; ++i) after[idx(i)] = make_belief(w.robots[idx(i)].x_belief, cfg.control.density, g);
  const CellMask unsafe_after = unsafe_region(w.fire.T, cfg.fire.thresholds);
  m = base_metrics(w, after, unsafe_after);
  m.slack = slack;
  m.fallbacks = fallbacks;
  m.plan_failures = plan_failures;
  m.solve_time_total = solve_sum;
  m.solves = solves;
  m.solve_time_mean = solves > 0 ? solve_sum / solves : 0.0;
  m.events = tick_events;

  if (trace) {
    trace->beliefs = std::move(after);
    trace->rho_d = global_target;
  }
  return m;
}

}  // namespace wildfire
