#pragma once

#include <span>
#include <vector>

#include "wildfire/fire_model.hpp"
#include "wildfire/grid_field.hpp"

namespace wildfire {

struct DensityParams {
  double sigma_loc = 0.1;    // localization std-dev, m
  double diffusion_T = 0.0;  // motion-noise diffusion coefficient, m^2/s
  double u_max = 0.5;        // speed bound, m/s

  void validate() const;
};

/// Gaussian belief of one robot rasterized on the grid (integrates to 1).
struct RobotDensity {
  Vec2 center;
  ScalarField field;
};

/// Spatial operators applied to one density. The Fokker-Planck rate is
///   rho_dot(u) = -(u.x * div_x + u.y * div_y) + diffusion_T * lap,
/// which is affine in u.
struct DensityOperators {
  ScalarField div_x;
  ScalarField div_y;
  ScalarField lap;

  static DensityOperators of(const ScalarField& rho);
  ScalarField rate(Vec2 u, double diffusion_T) const;
};

/// Onboard water bookkeeping. The tank drains as w_dot = -f / tank_capacity
/// and refills at refill_rate while inside the charger region.
struct WaterParams {
  double f_max = 1.0;          // 1/s
  double tank_capacity = 1.0;  // flow-seconds held by a full tank
  double refill_rate = 0.0;    // 1/s inside the charger
  bool refill_at_charger = true;

  void validate() const;
};

/// Cells farther than this many sigma from the center are left at zero.
inline constexpr double kDensityCutoff = 8.0;

/// Isotropic Gaussian with variance sigma_loc^2 at cell centers, renormalized
/// to unit mass. Throws GridError when x is outside the domain.
RobotDensity rasterize_density(Vec2 x, const DensityParams& params, const GridSpec& grid);

/// A rasterized belief with its operators, built once per tick and shared
/// by every evaluation that needs rho_i or rho_dot_i.
struct RobotBelief {
  RobotDensity density;
  DensityOperators ops;

  const ScalarField& field() const { return density.field; }
  Vec2 center() const { return density.center; }
};

RobotBelief make_belief(Vec2 x, const DensityParams& params, const GridSpec& grid);

/// Discrete Fokker-Planck rate -div(u rho) + T lap(rho) with zero-flux boundaries.
ScalarField fp_rate(const RobotDensity& rho, Vec2 u, const DensityParams& params);

struct WeightedDensity {
  const RobotDensity* density = nullptr;
  double water = 0.0;
};

/// rho_w = sum_i w_i (K_spray * rho_i).
ScalarField water_density(std::span<const WeightedDensity> robots, double sigma_s, const GridSpec& grid);

/// rho_d = gain * (T - T_low) / (T_high - T_low) on the deployment band, zero elsewhere.
ScalarField target_density(const ScalarField& T_est, const RegionThresholds& th, double gain);

/// Flow command clipped to [0, f_max], and to zero on an empty tank.
double admissible_flow(double f, double water, const WaterParams& params);

/// One bookkeeping step of the tank level; result clamped to [0, 1].
double water_update(double water, double flow, double dt, bool in_charger, const WaterParams& params);

}  // namespace wildfire
