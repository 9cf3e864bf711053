#include "wildfire/task_functions.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wildfire {

ScalarField total_density(std::span<const RobotBelief* const> robots, const GridSpec& grid) {
  ScalarField rho(grid);
  for (const RobotBelief* b : robots) rho += b->field();
  return rho;
}

double ClfEval::constant() const { return std::accumulate(drift.begin(), drift.end(), 0.0); }

double ClfEval::rate(std::span<const Vec2> u, std::span<const double> f) const {
  if (u.size() != lin_u.size() || f.size() != lin_f.size()) throw std::invalid_argument("ClfEval::rate: size mismatch");
  double r = constant();
  for (std::size_t i = 0; i < u.size(); ++i) r += dot(lin_u[i], u[i]) + lin_f[i] * f[i];
  return r;
}

ClfEval clf_eval(const ScalarField& rho_d, std::span<const ClfTerm> robots, double sigma_s, double diffusion_T) {
  const GridSpec& grid = rho_d.spec();
  ScalarField weighted(grid);
  for (const ClfTerm& r : robots) {
    require_same_grid(grid, r.belief->field().spec(), "clf_eval");
    if (r.water != 0.0) weighted.axpy(r.water, r.belief->field());
  }
  // The error e = rho_d - K * m is measured over the whole plane, so spray
  // carried past the domain edge still counts and V has no pull toward the
  // walls. With K * K = pi sigma^2 K_{sqrt2 sigma}, everything stays on the
  // grid:
  //   V = 1/2 int rho_d^2 - int (K rho_d) m + pi sigma^2 / 2 int m (K2 m)
  //   Ke := K * e = K rho_d - pi sigma^2 K2 m.
  const ScalarField K_rho_d = convolve(rho_d, sigma_s);
  const ScalarField K2_m = (M_PI * sigma_s * sigma_s) * convolve(weighted, std::sqrt(2.0) * sigma_s);
  const ScalarField Ke = K_rho_d - K2_m;

  ClfEval out;
  out.V = std::max(0.0, 0.5 * inner(rho_d, rho_d) - inner(K_rho_d, weighted) + 0.5 * inner(weighted, K2_m));
  for (const ClfTerm& r : robots) {
    const DensityOperators& ops = r.belief->ops;
    out.lin_u.push_back({r.water * inner(Ke, ops.div_x), r.water * inner(Ke, ops.div_y)});
    out.lin_f.push_back(-inner(Ke, r.belief->field()));
    out.drift.push_back(-r.water * diffusion_T * inner(Ke, ops.lap));
  }
  return out;
}

double SafetyCbfEval::constant() const { return std::accumulate(drift.begin(), drift.end(), 0.0); }

double SafetyCbfEval::rate(std::span<const Vec2> u) const {
  if (u.size() != lin_u.size()) throw std::invalid_argument("SafetyCbfEval::rate: size mismatch");
  double r = constant();
  for (std::size_t i = 0; i < u.size(); ++i) r += dot(lin_u[i], u[i]);
  return r;
}

SafetyCbfEval safety_cbf_eval(const ScalarField& rho_total, std::span<const RobotBelief* const> robots,
                              const CellMask& unsafe, double epsilon, double diffusion_T) {
  require_same_grid(rho_total.spec(), unsafe.spec(), "safety_cbf_eval");
  SafetyCbfEval out;
  out.h = epsilon - inner(rho_total, rho_total, unsafe);
  for (const RobotBelief* b : robots) {
    // rho_dot_i = -(u.x div_x + u.y div_y) + T lap
    out.lin_u.push_back({2.0 * inner(rho_total, b->ops.div_x, unsafe), 2.0 * inner(rho_total, b->ops.div_y, unsafe)});
    out.drift.push_back(-2.0 * diffusion_T * inner(rho_total, b->ops.lap, unsafe));
  }
  return out;
}

SafetyCbfEval safety_cbf_eval(std::span<const RobotBelief* const> robots, const CellMask& unsafe, double epsilon,
                              double diffusion_T) {
  return safety_cbf_eval(total_density(robots, unsafe.spec()), robots, unsafe, epsilon, diffusion_T);
}

EnergyCbfEval energy_cbf_eval(double E, const ChargePath& path, const EnergyParams& energy) {
  if (path.waypoints.empty()) throw std::invalid_argument("energy_cbf_eval: robot has no charge path");
  EnergyCbfEval out;
  out.h_E = E - energy.E_min - path.P;
  out.quad_u = energy.c1;
  out.lin_u = path.e_rate * path.heading();
  out.constant = -energy.c2;
  return out;
}

double neighbor_contribution(const ScalarField& rho_local, const RobotBelief& neighbor, Vec2 u,
                             const CellMask& unsafe, double diffusion_T) {
  const DensityOperators& ops = neighbor.ops;
  return 2.0 * (u.x * inner(rho_local, ops.div_x, unsafe) + u.y * inner(rho_local, ops.div_y, unsafe)) -
         2.0 * diffusion_T * inner(rho_local, ops.lap, unsafe);
}

double worst_case_delta(const ScalarField& rho_local, std::span<const RobotBelief* const> neighbors,
                        const CellMask& unsafe, double u_max, double diffusion_T) {
  double delta = 0.0;
  for (const RobotBelief* b : neighbors) {
    const Vec2 g{inner(rho_local, b->ops.div_x, unsafe), inner(rho_local, b->ops.div_y, unsafe)};
    delta += 2.0 * u_max * norm(g) + 2.0 * diffusion_T * inner(rho_local, b->ops.lap, unsafe);
  }
  return delta;
}

}  // namespace wildfire
