#include "wildfire/swarm_density.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace wildfire {

void DensityParams::validate() const {
  if (!(sigma_loc > 0.0)) throw ConfigError("density: sigma_loc must be positive");
  if (!(diffusion_T >= 0.0)) throw ConfigError("density: diffusion_T must be non-negative");
  if (!(u_max > 0.0)) throw ConfigError("density: u_max must be positive");
}

void WaterParams::validate() const {
  if (!(f_max > 0.0)) throw ConfigError("water: f_max must be positive");
  if (!(tank_capacity > 0.0)) throw ConfigError("water: tank_capacity must be positive");
  if (!(refill_rate >= 0.0)) throw ConfigError("water: refill_rate must be non-negative");
}

DensityOperators DensityOperators::of(const ScalarField& rho) {
  return {flux_divergence_x(rho), flux_divergence_y(rho), laplacian(rho)};
}

ScalarField DensityOperators::rate(Vec2 u, double diffusion_T) const {
  ScalarField out(lap.spec());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = -(u.x * div_x[k] + u.y * div_y[k]) + diffusion_T * lap[k];
  return out;
}

RobotDensity rasterize_density(Vec2 x, const DensityParams& params, const GridSpec& grid) {
  if (!grid.contains(x)) throw GridError("rasterize_density: position outside the domain");
  RobotDensity rho{x, ScalarField(grid)};
  const double var = params.sigma_loc * params.sigma_loc;
  const double cutoff2 = kDensityCutoff * kDensityCutoff * var;
  // Exponents are taken relative to the nearest cell center, so a spread
  // far below the cell size still leaves that cell with all the mass.
  const auto near = grid.cell_of(x);
  const Vec2 dn = grid.center(near[0], near[1]) - x;
  const double r2_min = dot(dn, dn);
  double mass = 0.0;
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const Vec2 d = grid.center(i, j) - x;
      const double r2 = dot(d, d) - r2_min;
      if (r2 > cutoff2) continue;
      const double v = std::exp(-0.5 * r2 / var);
      rho.field(i, j) = v;
      mass += v;
    }
  }
  mass *= grid.cell_area();
  if (!(mass > 0.0)) throw GridError("rasterize_density: density has no mass on the grid");
  rho.field *= 1.0 / mass;
  return rho;
}

RobotBelief make_belief(Vec2 x, const DensityParams& params, const GridSpec& grid) {
  RobotDensity rho = rasterize_density(x, params, grid);
  DensityOperators ops = DensityOperators::of(rho.field);
  return {std::move(rho), std::move(ops)};
}

ScalarField fp_rate(const RobotDensity& rho, Vec2 u, const DensityParams& params) {
  if (norm(u) > params.u_max * (1.0 + 1e-9)) throw std::invalid_argument("fp_rate: velocity exceeds u_max");
  return DensityOperators::of(rho.field).rate(u, params.diffusion_T);
}

ScalarField water_density(std::span<const WeightedDensity> robots, double sigma_s, const GridSpec& grid) {
  // Convolution is linear, so the water-weighted sum is convolved once.
  ScalarField weighted(grid);
  for (const WeightedDensity& r : robots) {
    if (r.water < 0.0 || r.water > 1.0) throw std::invalid_argument("water_density: water level outside [0,1]");
    if (r.water > 0.0) weighted.axpy(r.water, r.density->field);
  }
  return convolve(weighted, sigma_s);
}

ScalarField target_density(const ScalarField& T_est, const RegionThresholds& th, double gain) {
  ScalarField out(T_est.spec());
  const double band = th.T_high - th.T_low;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double T = T_est[k];
    if (T >= th.T_low && T <= th.T_high) out[k] = gain * (T - th.T_low) / band;
  }
  return out;
}

double admissible_flow(double f, double water, const WaterParams& params) {
  if (water <= 0.0) return 0.0;
  return std::clamp(f, 0.0, params.f_max);
}

double water_update(double water, double flow, double dt, bool in_charger, const WaterParams& params) {
  double w = water - dt * flow / params.tank_capacity;
  if (in_charger && params.refill_at_charger) w += dt * params.refill_rate;
  return std::clamp(w, 0.0, 1.0);
}

}  // namespace wildfire
