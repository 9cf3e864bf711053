#include "wildfire/fire_model.hpp"

#include <algorithm>
#include <cmath>

namespace wildfire {

void FireParams::validate() const {
  if (!(eta > 0.0)) throw ConfigError("fire: eta must be positive");
  if (!(A_gain > 0.0)) throw ConfigError("fire: A_gain must be positive");
  if (!(C_c > 0.0)) throw ConfigError("fire: C_c must be positive");
  if (!(gamma_arr > 0.0)) throw ConfigError("fire: gamma_arr must be positive");
  if (!(C_s > 0.0)) throw ConfigError("fire: C_s must be positive");
  if (!(T_a > 0.0)) throw ConfigError("fire: T_a must be positive");
}

void RegionThresholds::validate(double T_a) const {
  if (!(T_a < T_low && T_low < T_high)) throw ConfigError("thresholds: need T_a < T_low < T_high");
  if (!(T_a < T_ignite)) throw ConfigError("thresholds: need T_a < T_ignite");
}

double arrhenius_rate(double T, const FireParams& params) {
  const double excess = T - params.T_a;
  if (!(excess > 0.0)) return 0.0;
  return std::exp(-params.gamma_arr / excess);
}

ScalarField suppression_field(std::span<const Sprayer> sprayers, double sigma_s, const GridSpec& grid) {
  ScalarField out(grid);
  const double inv_two_var = 1.0 / (2.0 * sigma_s * sigma_s);
  for (const Sprayer& sp : sprayers) {
    if (sp.flow < 0.0) throw ConfigError("suppression: flow rates must be non-negative");
    if (sp.flow == 0.0) continue;
    for (int j = 0; j < grid.ny; ++j) {
      for (int i = 0; i < grid.nx; ++i) {
        const Vec2 d = grid.center(i, j) - sp.position;
        out(i, j) -= sp.flow * std::exp(-dot(d, d) * inv_two_var);
      }
    }
  }
  return out;
}

void check_fire_stability(const GridSpec& grid, const FireParams& params, double dt) {
  if (!(dt > 0.0)) throw ConfigError("fire: dt must be positive");
  if (dt > grid.h * grid.h / (4.0 * params.eta))
    throw ConfigError("fire: dt violates the diffusion stability bound h^2/(4 eta)");
  const double vmax = params.wind.spec().size() == 0 ? 0.0 : params.wind.max_norm();
  if (dt * vmax > grid.h) throw ConfigError("fire: dt violates the advection CFL bound dt*|v| <= h");
}

FireState fire_step(const FireState& state, const FireParams& params, const ScalarField& u_s, double dt,
                    ClampStats* stats) {
  const GridSpec& g = state.T.spec();
  require_same_grid(g, state.S.spec(), "fire_step");
  require_same_grid(g, u_s.spec(), "fire_step");

  ScalarField rate = laplacian(state.T);
  rate *= params.eta;
  if (params.wind.spec().size() != 0) rate -= advect_upwind(state.T, params.wind);

  FireState next{ScalarField(g), ScalarField(g)};
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double T = state.T[k];
    const double S = state.S[k];
    const double r = arrhenius_rate(T, params);
    const double dT = rate[k] + params.A_gain * (S * r - params.C_c * (T - params.T_a)) + u_s[k];
    double T_new = T + dt * dT;
    double S_new = S - dt * params.C_s * S * r;
    if (T_new < params.T_a) {
      T_new = params.T_a;
      if (stats) ++stats->temperature_floor;
    }
    if (S_new < 0.0) {
      S_new = 0.0;
      if (stats) ++stats->fuel_floor;
    } else if (S_new > 1.0) {
      S_new = 1.0;
      if (stats) ++stats->fuel_ceiling;
    }
    next.T[k] = T_new;
    next.S[k] = S_new;
  }
  return next;
}

FireState ignite(const GridSpec& grid, double T_a, std::span<const Vec2> centers, double peak_excess,
                 double radius) {
  FireState st{ScalarField(grid, T_a), ScalarField(grid, 1.0)};
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      double excess = 0.0;
      for (const Vec2& c : centers) {
        const Vec2 d = grid.center(i, j) - c;
        excess = std::max(excess, peak_excess * std::exp(-dot(d, d) / (2.0 * radius * radius)));
      }
      st.T(i, j) = T_a + excess;
    }
  }
  return st;
}

CellMask deployment_region(const ScalarField& T, const RegionThresholds& th) {
  CellMask m(T.spec());
  for (std::size_t k = 0; k < T.size(); ++k) m.set(k, T[k] >= th.T_low && T[k] <= th.T_high);
  return m;
}

CellMask unsafe_region(const ScalarField& T, const RegionThresholds& th) {
  CellMask m(T.spec());
  for (std::size_t k = 0; k < T.size(); ++k) m.set(k, T[k] >= th.T_high);
  return m;
}

double fire_area(const ScalarField& T, const RegionThresholds& th) {
  std::size_t n = 0;
  for (double v : T.values())
    if (v >= th.T_ignite) ++n;
  return static_cast<double>(n) * T.spec().cell_area();
}

}  // namespace wildfire
