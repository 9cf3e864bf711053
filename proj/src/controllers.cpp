#include "wildfire/controllers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>
#include <ostream>

#include "wildfire/fire_model.hpp"
#include "wildfire/task_functions.hpp"

namespace wildfire {

void ControllerGains::validate() const {
  if (!(alpha_v > 0.0 && alpha_h > 0.0 && alpha_E > 0.0))
    throw ConfigError("controller: class-K gains must be positive");
  if (!(gamma > 0.0 && zeta > 0.0 && epsilon > 0.0))
    throw ConfigError("controller: gamma, zeta and epsilon must be positive");
}

void ControllerConfig::validate() const {
  gains.validate();
  density.validate();
  water.validate();
  energy.validate();
  if (!(sigma_s > 0.0)) throw ConfigError("controller: sigma_s must be positive");
  if (!(dt > 0.0)) throw ConfigError("controller: dt must be positive");
  if (!(energy_margin >= 0.0)) throw ConfigError("controller: energy_margin must be non-negative");
  if (collision.enabled && !(collision.r_coll > 0.0 && collision.alpha_c > 0.0))
    throw ConfigError("collision: r_coll and alpha_c must be positive");
}

double flow_bound(double water, const ControllerConfig& cfg) {
  if (water <= 0.0) return 0.0;
  return std::min(cfg.water.f_max, water * cfg.water.tank_capacity / cfg.dt);
}

namespace {

using Clock = std::chrono::steady_clock;

std::size_t idx(int k) { return static_cast<std::size_t>(k); }

void add_energy_row(ConvexProgram& p, int block, const RobotView& r, const ControllerConfig& cfg) {
  // alpha_E h_E + h_E_dot >= 0  <=>  c1 |u|^2 - lin . u <= alpha_E h_E + constant (+ charging inside C)
  const EnergyCbfEval ev = energy_cbf_eval(r.E, *r.path, cfg.energy);
  QuadraticRow& row = p.add_quadratic(block, ev.quad_u, "energy");
  row.coeffs[idx(p.u_index(block))] = -ev.lin_u.x;
  row.coeffs[idx(p.u_index(block) + 1)] = -ev.lin_u.y;
  row.rhs = cfg.gains.alpha_E * (ev.h_E - cfg.energy_margin) + ev.constant + (r.in_charger ? cfg.energy.r_charge : 0.0);
}

bool row_active(const std::vector<double>& coeffs, double rhs, const std::vector<double>& x, double extra = 0.0) {
  double g = extra - rhs;
  for (std::size_t k = 0; k < coeffs.size(); ++k) g += coeffs[k] * x[k];
  return g >= -1e-6 * std::max(1.0, std::abs(rhs));
}

std::string active_tags(const ConvexProgram& p, const Solution& sol, int block) {
  std::string out;
  auto append = [&](const std::string& tag) {
    if (!out.empty()) out += '|';
    out += tag;
  };
  for (const LinearRow& r : p.linear) {
    const bool mine = r.tag == "clf" || r.tag == "safety" ||
                      std::abs(r.coeffs[idx(p.u_index(block))]) + std::abs(r.coeffs[idx(p.u_index(block) + 1)]) > 0.0;
    if (mine && row_active(r.coeffs, r.rhs, sol.x)) append(r.tag);
  }
  for (const QuadraticRow& r : p.quadratic) {
    if (r.block != block) continue;
    const Vec2 u = sol.u(p, block);
    if (row_active(r.coeffs, r.rhs, sol.x, r.quad * dot(u, u))) append(r.tag);
  }
  if (norm(sol.u(p, block)) >= p.u_max[idx(block)] * (1.0 - 1e-6) && p.u_max[idx(block)] > 0.0) append("speed");
  return out;
}

}  // namespace

ControlCommand fallback_command(const RobotView& robot) {
  ControlCommand c;
  c.robot = robot.id;
  c.fallback = true;
  c.status = SolveStatus::kInfeasible;
  if (robot.path != nullptr) c.u = robot.path->u_plan * robot.path->heading();
  return c;
}

ConvexProgram centralized_program(std::span<const RobotView> robots, const ScalarField& rho_d,
                                  const CellMask& unsafe, const ControllerConfig& cfg) {
  const int n = static_cast<int>(robots.size());
  ConvexProgram p(n, n, true);
  p.zeta = cfg.gains.zeta;
  p.gamma = cfg.gains.gamma;
  std::vector<ClfTerm> terms;
  std::vector<const RobotBelief*> beliefs;
  for (int i = 0; i < n; ++i) {
    const RobotView& r = robots[idx(i)];
    p.u_max[idx(i)] = cfg.density.u_max;
    p.f_max[idx(i)] = flow_bound(r.water, cfg);
    terms.push_back({r.belief, r.water});
    beliefs.push_back(r.belief);
  }
  const double T = cfg.density.diffusion_T;

  const ClfEval clf = clf_eval(rho_d, terms, cfg.sigma_s, T);
  LinearRow& v = p.add_linear("clf");
  for (int i = 0; i < n; ++i) {
    v.coeffs[idx(p.u_index(i))] = clf.lin_u[idx(i)].x;
    v.coeffs[idx(p.u_index(i) + 1)] = clf.lin_u[idx(i)].y;
    v.coeffs[idx(p.f_index(i))] = clf.lin_f[idx(i)];
  }
  v.coeffs[idx(p.s_index())] = -1.0;
  v.rhs = -cfg.gains.alpha_v * clf.V - clf.constant();

  if (!unsafe.empty()) {
    const SafetyCbfEval hs = safety_cbf_eval(beliefs, unsafe, cfg.gains.epsilon, T);
    LinearRow& row = p.add_linear("safety");
    for (int i = 0; i < n; ++i) {
      row.coeffs[idx(p.u_index(i))] = -hs.lin_u[idx(i)].x;
      row.coeffs[idx(p.u_index(i) + 1)] = -hs.lin_u[idx(i)].y;
    }
    row.rhs = cfg.gains.alpha_h * hs.h + hs.constant();
  }

  for (int i = 0; i < n; ++i) add_energy_row(p, i, robots[idx(i)], cfg);

  if (cfg.collision.enabled) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const Vec2 d = robots[idx(i)].belief->center() - robots[idx(j)].belief->center();
        const double dist = norm(d);
        if (dist == 0.0) continue;
        const Vec2 nv = (1.0 / dist) * d;
        LinearRow& row = p.add_linear("collision");
        row.coeffs[idx(p.u_index(i))] = -nv.x;
        row.coeffs[idx(p.u_index(i) + 1)] = -nv.y;
        row.coeffs[idx(p.u_index(j))] = nv.x;
        row.coeffs[idx(p.u_index(j) + 1)] = nv.y;
        row.rhs = cfg.collision.alpha_c * (dist - cfg.collision.r_coll);
      }
  }
  return p;
}

std::vector<ControlCommand> centralized_step(std::span<const RobotView> robots, const ScalarField& rho_d,
                                             const CellMask& unsafe, const ControllerConfig& cfg) {
  const ConvexProgram p = centralized_program(robots, rho_d, unsafe, cfg);
  const auto t0 = Clock::now();
  const Solution sol = solve(p, cfg.solver);
  const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();

  std::vector<ControlCommand> out;
  for (int i = 0; i < static_cast<int>(robots.size()); ++i) {
    ControlCommand c;
    if (sol.ok()) {
      c.robot = robots[idx(i)].id;
      c.u = sol.u(p, i);
      c.f = std::clamp(sol.f(p, i), 0.0, p.f_max[idx(i)]);
      c.slack = std::max(0.0, sol.s(p));
      c.status = sol.status;
      c.active = active_tags(p, sol, i);
    } else {
      c = fallback_command(robots[idx(i)]);
      c.status = sol.status;
    }
    c.solve_time = elapsed;
    c.iterations = sol.iterations;
    out.push_back(std::move(c));
  }
  return out;
}

ConvexProgram decentralized_program(const RobotView& self, std::span<const RobotView> neighbors,
                                    const ScalarField& rho_d, const CellMask& unsafe, const ControllerConfig& cfg) {
  ConvexProgram p(1, 1, true);
  p.zeta = cfg.gains.zeta;
  p.gamma = cfg.gains.gamma;
  p.u_max[0] = cfg.density.u_max;
  p.f_max[0] = flow_bound(self.water, cfg);
  const double T = cfg.density.diffusion_T;

  // Neighbours keep their last commanded motion and are assumed not to spray.
  std::vector<ClfTerm> terms{{self.belief, self.water}};
  std::vector<const RobotBelief*> local{self.belief};
  std::vector<const RobotBelief*> others;
  for (const RobotView& nb : neighbors) {
    terms.push_back({nb.belief, nb.water});
    local.push_back(nb.belief);
    others.push_back(nb.belief);
  }
  const ClfEval clf = clf_eval(rho_d, terms, cfg.sigma_s, T);
  double known = clf.constant();
  for (std::size_t j = 0; j < neighbors.size(); ++j) known += dot(clf.lin_u[j + 1], neighbors[j].last_u);
  LinearRow& v = p.add_linear("clf");
  v.coeffs[0] = clf.lin_u[0].x;
  v.coeffs[1] = clf.lin_u[0].y;
  v.coeffs[idx(p.f_index(0))] = clf.lin_f[0];
  v.coeffs[idx(p.s_index())] = -1.0;
  v.rhs = -cfg.gains.alpha_v * clf.V - known;

  if (!unsafe.empty()) {
    const ScalarField rho_local = total_density(local, unsafe.spec());
    const RobotBelief* own = self.belief;
    const SafetyCbfEval hs = safety_cbf_eval(rho_local, std::span(&own, 1), unsafe, cfg.gains.epsilon, T);
    const double delta = worst_case_delta(rho_local, others, unsafe, cfg.density.u_max, T);
    LinearRow& row = p.add_linear("safety");
    row.coeffs[0] = -hs.lin_u[0].x;
    row.coeffs[1] = -hs.lin_u[0].y;
    row.rhs = cfg.gains.alpha_h * hs.h + hs.drift[0] - delta;
  }

  add_energy_row(p, 0, self, cfg);

  if (cfg.collision.enabled) {
    // Each robot of a pair takes half of the required separation rate.
    for (const RobotView& nb : neighbors) {
      const Vec2 d = self.belief->center() - nb.belief->center();
      const double dist = norm(d);
      if (dist == 0.0) continue;
      LinearRow& row = p.add_linear("collision");
      row.coeffs[0] = -d.x / dist;
      row.coeffs[1] = -d.y / dist;
      row.rhs = 0.5 * cfg.collision.alpha_c * (dist - cfg.collision.r_coll);
    }
  }
  return p;
}

ControlCommand decentralized_step(const RobotView& self, std::span<const RobotView> neighbors,
                                  const ScalarField& rho_d, const CellMask& unsafe, const ControllerConfig& cfg) {
  const ConvexProgram p = decentralized_program(self, neighbors, rho_d, unsafe, cfg);
  const auto t0 = Clock::now();
  const Solution sol = solve(p, cfg.solver);
  const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
  ControlCommand c;
  if (sol.ok()) {
    c.robot = self.id;
    c.u = sol.u(p, 0);
    c.f = std::clamp(sol.f(p, 0), 0.0, p.f_max[0]);
    c.slack = std::max(0.0, sol.s(p));
    c.status = sol.status;
    c.active = active_tags(p, sol, 0);
  } else {
    c = fallback_command(self);
    c.status = sol.status;
  }
  c.solve_time = elapsed;
  c.iterations = sol.iterations;
  return c;
}

std::vector<ControlCommand> collision_filter(std::vector<ControlCommand> commands, std::span<const Vec2> positions,
                                             const CollisionParams& params, double u_max) {
  if (!params.enabled || commands.size() < 2) return commands;
  const int n = static_cast<int>(commands.size());
  ConvexProgram p(n, 0, false);
  p.linear_cost.assign(idx(p.dim()), 0.0);
  for (int i = 0; i < n; ++i) {
    p.u_max[idx(i)] = u_max;
    // |u - u_nom|^2 = |u|^2 - 2 u_nom . u + const
    p.linear_cost[idx(p.u_index(i))] = -2.0 * commands[idx(i)].u.x;
    p.linear_cost[idx(p.u_index(i) + 1)] = -2.0 * commands[idx(i)].u.y;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const Vec2 d = positions[idx(i)] - positions[idx(j)];
      const double dist = norm(d);
      if (dist == 0.0) continue;
      LinearRow& row = p.add_linear("collision");
      row.coeffs[idx(p.u_index(i))] = -d.x / dist;
      row.coeffs[idx(p.u_index(i) + 1)] = -d.y / dist;
      row.coeffs[idx(p.u_index(j))] = d.x / dist;
      row.coeffs[idx(p.u_index(j) + 1)] = d.y / dist;
      row.rhs = params.alpha_c * (dist - params.r_coll);
    }
  if (p.linear.empty()) return commands;
  const Solution sol = solve(p);
  for (int i = 0; i < n; ++i) commands[idx(i)].u = sol.ok() ? sol.u(p, i) : Vec2{};
  return commands;
}

std::string program_json(const ConvexProgram& p) {
  nlohmann::json j;
  j["robots"] = p.robots;
  j["flows"] = p.flows;
  j["has_slack"] = p.has_slack;
  j["zeta"] = p.zeta;
  j["gamma"] = p.gamma;
  j["u_max"] = p.u_max;
  j["f_max"] = p.f_max;
  j["linear_cost"] = p.linear_cost;
  j["linear"] = nlohmann::json::array();
  for (const LinearRow& r : p.linear) j["linear"].push_back({{"tag", r.tag}, {"coeffs", r.coeffs}, {"rhs", r.rhs}});
  j["quadratic"] = nlohmann::json::array();
  for (const QuadraticRow& r : p.quadratic)
    j["quadratic"].push_back(
        {{"tag", r.tag}, {"block", r.block}, {"quad", r.quad}, {"coeffs", r.coeffs}, {"rhs", r.rhs}});
  return j.dump();
}

void write_command_header(std::ostream& out) {
  out << "tick,robot,ux,uy,f,slack,status,fallback,iterations,solve_time,active\n";
}

void write_command(std::ostream& out, long tick, const ControlCommand& c) {
  out << tick << ',' << c.robot << ',' << c.u.x << ',' << c.u.y << ',' << c.f << ',' << c.slack << ','
      << to_string(c.status) << ',' << (c.fallback ? 1 : 0) << ',' << c.iterations << ',' << c.solve_time << ','
      << c.active << '\n';
}

}  // namespace wildfire
