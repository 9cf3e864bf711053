#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wildfire/grid_field.hpp"
#include "wildfire/swarm_density.hpp"

namespace wildfire {

struct ChargerRegion {
  Vec2 center;
  double radius = 0.0;

  bool contains(Vec2 p) const { return distance(p, center) <= radius; }
  void validate(const GridSpec& grid) const;
};

/// Energy rates shared by the planner, the energy barrier and the battery.
struct EnergyParams {
  double c1 = 0.0;        // per (m/s)^2 per s
  double c2 = 0.0;        // per s
  double E_min = 0.0;
  double r_charge = 0.0;  // per s inside the charger

  void validate() const;
  /// Battery fraction spent per metre when flying at u_plan.
  double rate_per_metre(double u_plan) const { return (c1 * u_plan * u_plan + c2) / u_plan; }
};

struct ChargePath {
  std::vector<Vec2> waypoints;  // first = robot position, last inside the charger
  double P = 0.0;               // energy-to-go
  double u_plan = 0.0;
  double e_rate = 0.0;          // P per metre

  double length() const;
  /// Unit direction of the first segment, zero for a single waypoint.
  Vec2 heading() const;
};

/// P = (c1 u_plan^2 + c2) * length / u_plan
double path_energy(const ChargePath& path, const EnergyParams& energy, double u_plan);

struct PathAdvance {
  ChargePath path;
  bool replan = false;
  double offset = 0.0;  // distance from the robot to the polyline
};

/// Re-anchors the path at x_new: waypoints already passed are dropped, x_new
/// becomes the first waypoint and P is recomputed from it. The replan flag
/// is raised when x_new lies farther than r_proj from the polyline.
PathAdvance path_advance(const ChargePath& path, Vec2 x_new, const ChargerRegion& charger, double r_proj);

/// A neighbour seen by the decentralized planner: its belief moves at
/// `velocity` for the first `horizon` seconds of plan time, then holds.
struct PlannerNeighbor {
  Vec2 position;
  Vec2 velocity;
};

/// Spatial-safety context of one planning query.
///
/// Centralized: `fixed` holds every other robot's density (held still),
/// `neighbors` is empty. Decentralized: `fixed` is empty, `neighbors` are
/// the robot's neighbours and the check is relaxed by their worst case.
struct PlannerSafety {
  const CellMask* unsafe = nullptr;
  ScalarField fixed;
  std::vector<PlannerNeighbor> neighbors;
  double neighbor_horizon = 1.0;  // s
  double epsilon = 0.0;
  double alpha = 1.0;
  DensityParams density;
};

struct PlannerParams {
  double u_plan = 0.5;
  double step_time = 0.2;  // s of flight per extension
  int max_nodes = 2000;
  double goal_bias = 0.1;
  int scale_halvings = 3;  // step scaled by 1, 1/2, ... before rejecting
  double goal_margin = 0.05;

  void validate() const;
  double step() const { return u_plan * step_time; }
};

/// Outcome of the per-waypoint barrier check.
struct WaypointCheck {
  double h = 0.0;       // h_s of the virtual density at the waypoint
  double margin = 0.0;  // alpha h + h_dot - delta for the outgoing velocity
};

/// h_s and the barrier margin of a virtual density at p moving with velocity
/// u at plan time tau.
WaypointCheck check_waypoint(const PlannerSafety& safety, const GridSpec& grid, Vec2 p, Vec2 u, double tau);

/// Seeded RRT toward the charger with barrier-checked steering and shortcut
/// smoothing. Returns nullopt when the node cap is hit without reaching C.
std::optional<ChargePath> rrt_plan(Vec2 start, const ChargerRegion& charger, const PlannerSafety& safety,
                                   const GridSpec& grid, const PlannerParams& params, const EnergyParams& energy,
                                   std::uint64_t seed);

/// Re-runs the planner's checks along a path (all waypoints after the first).
bool verify_path(const ChargePath& path, const ChargerRegion& charger, const PlannerSafety& safety,
                 const GridSpec& grid, double max_gap);

}  // namespace wildfire
