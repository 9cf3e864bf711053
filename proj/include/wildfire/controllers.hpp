#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wildfire/charge_planner.hpp"
#include "wildfire/conic_solver.hpp"
#include "wildfire/swarm_density.hpp"

namespace wildfire {

struct ControllerGains {
  double alpha_v = 1.0;
  double alpha_h = 1.0;
  double alpha_E = 1.0;
  double gamma = 1.0;
  double zeta = 1.0;
  double epsilon = 0.1;

  void validate() const;
};

struct CollisionParams {
  bool enabled = false;
  double r_coll = 0.7;   // m
  double alpha_c = 1.0;  // 1/s
};

/// Everything the controllers need besides per-tick state.
struct ControllerConfig {
  ControllerGains gains;
  DensityParams density;
  WaterParams water;
  EnergyParams energy;
  CollisionParams collision;
  SolverSettings solver;
  double sigma_s = 0.3;
  double dt = 0.05;
  double energy_margin = 0.0;  // battery held back from h_E against estimate noise

  void validate() const;
};

/// What a controller knows about one robot at solve time.
struct RobotView {
  int id = 0;
  const RobotBelief* belief = nullptr;  // centered at the measured position
  double E = 1.0;
  double water = 1.0;
  const ChargePath* path = nullptr;
  bool in_charger = false;
  Vec2 last_u;  // last command received from this robot
};

struct ControlCommand {
  int robot = 0;
  Vec2 u;
  double f = 0.0;
  double slack = 0.0;
  bool fallback = false;
  SolveStatus status = SolveStatus::kOptimal;
  std::string active;  // '|'-joined tags of rows active at the solution
  double solve_time = 0.0;  // s, wall clock of the solver call
  int iterations = 0;
};

/// Joint program over all robots; one solve.
std::vector<ControlCommand> centralized_step(std::span<const RobotView> robots, const ScalarField& rho_d,
                                             const CellMask& unsafe, const ControllerConfig& cfg);

/// Program of robot `self` over (u_i, f_i, s). `neighbors` are robot i's
/// current neighbours; `rho_d` is built from robot i's local map.
ControlCommand decentralized_step(const RobotView& self, std::span<const RobotView> neighbors,
                                  const ScalarField& rho_d, const CellMask& unsafe, const ControllerConfig& cfg);

/// Minimal change of nominal commands so every pair satisfies
///   n_ij . (u_i - u_j) >= -alpha_c (d_ij - r_coll),  |u_i| <= u_max.
std::vector<ControlCommand> collision_filter(std::vector<ControlCommand> commands, std::span<const Vec2> positions,
                                             const CollisionParams& params, double u_max);

/// Track the charge path at u_plan without spraying.
ControlCommand fallback_command(const RobotView& robot);

/// Program assembled by the controllers, exposed for tests and debug dumps.
ConvexProgram centralized_program(std::span<const RobotView> robots, const ScalarField& rho_d,
                                  const CellMask& unsafe, const ControllerConfig& cfg);
ConvexProgram decentralized_program(const RobotView& self, std::span<const RobotView> neighbors,
                                    const ScalarField& rho_d, const CellMask& unsafe, const ControllerConfig& cfg);

/// Largest admissible flow for a tank level (empties the tank in one step at most).
double flow_bound(double water, const ControllerConfig& cfg);

/// JSON rendering of a program (schema in the README).
std::string program_json(const ConvexProgram& p);

void write_command_header(std::ostream& out);
void write_command(std::ostream& out, long tick, const ControlCommand& c);

}  // namespace wildfire
