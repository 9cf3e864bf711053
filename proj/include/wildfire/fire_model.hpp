#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "wildfire/grid_field.hpp"

namespace wildfire {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct FireParams {
  double eta = 0.0;        // thermal diffusivity, m^2/s
  VectorField wind;        // m/s
  double A_gain = 0.0;     // K/s
  double C_c = 0.0;        // 1/s
  double T_a = 0.0;        // K
  double gamma_arr = 0.0;  // K
  double C_s = 0.0;        // 1/s

  void validate() const;
};

struct FireState {
  ScalarField T;  // temperature, K
  ScalarField S;  // fuel fraction in [0, 1]
};

struct RegionThresholds {
  double T_low = 0.0;
  double T_high = 0.0;
  double T_ignite = 0.0;

  void validate(double T_a) const;
};

struct Sprayer {
  Vec2 position;
  double flow = 0.0;
};

/// Clamp activity counters for one or more fire steps.
struct ClampStats {
  std::size_t temperature_floor = 0;
  std::size_t fuel_floor = 0;
  std::size_t fuel_ceiling = 0;
};

/// Arrhenius burn rate exp(-gamma / (T - T_a)), zero at or below ambient.
double arrhenius_rate(double T, const FireParams& params);

/// u_s(r) = -sum_i f_i exp(-|r - x_i|^2 / (2 sigma_s^2)), evaluated exactly at cell centers.
ScalarField suppression_field(std::span<const Sprayer> sprayers, double sigma_s, const GridSpec& grid);

/// Throws ConfigError unless dt <= h^2 / (4 eta) and dt * max|wind| <= h.
void check_fire_stability(const GridSpec& grid, const FireParams& params, double dt);

/// One explicit Euler step of the temperature/fuel system followed by the
/// T >= T_a and S in [0, 1] clamps.
FireState fire_step(const FireState& state, const FireParams& params, const ScalarField& u_s, double dt,
                    ClampStats* stats = nullptr);

/// Ambient temperature with Gaussian hot spots (max-combined) and full fuel.
FireState ignite(const GridSpec& grid, double T_a, std::span<const Vec2> centers, double peak_excess,
                 double radius);

CellMask deployment_region(const ScalarField& T, const RegionThresholds& th);
CellMask unsafe_region(const ScalarField& T, const RegionThresholds& th);
double fire_area(const ScalarField& T, const RegionThresholds& th);

}  // namespace wildfire
