#pragma once

#include <span>
#include <vector>

#include "wildfire/charge_planner.hpp"
#include "wildfire/grid_field.hpp"
#include "wildfire/swarm_density.hpp"

namespace wildfire {

struct ClfTerm {
  const RobotBelief* belief = nullptr;
  double water = 0.0;
};

/// V = 1/2 int (rho_d - rho_w)^2 over the plane (rho_w = K * sum_i w_i rho_i
/// extends past the domain) and the control-affine form of
///   V_dot = sum_i int (rho_d - rho_w) (-w_i K * rho_dot_i(u_i) - f_i K * rho_i)
/// with rho_d frozen over the step.
struct ClfEval {
  double V = 0.0;
  std::vector<Vec2> lin_u;
  std::vector<double> lin_f;
  std::vector<double> drift;  // per robot, the diffusion part

  double constant() const;
  double rate(std::span<const Vec2> u, std::span<const double> f) const;
};

ClfEval clf_eval(const ScalarField& rho_d, std::span<const ClfTerm> robots, double sigma_s, double diffusion_T);

/// h_s = eps - int_A rho^2 for rho = sum of the listed beliefs, and
/// h_s_dot = -2 int_A rho rho_dot = sum_i (lin_u[i] . u_i + drift[i]).
struct SafetyCbfEval {
  double h = 0.0;
  std::vector<Vec2> lin_u;
  std::vector<double> drift;

  double constant() const;
  double rate(std::span<const Vec2> u) const;
};

SafetyCbfEval safety_cbf_eval(std::span<const RobotBelief* const> robots, const CellMask& unsafe, double epsilon,
                              double diffusion_T);

/// Same, for a density total that may include mass from robots not listed
/// (coefficients are produced only for `robots`).
SafetyCbfEval safety_cbf_eval(const ScalarField& rho_total, std::span<const RobotBelief* const> robots,
                              const CellMask& unsafe, double epsilon, double diffusion_T);

/// h_E = E - E_min - P and
///   h_E_dot(u) = -quad_u |u|^2 + lin_u . u + constant
/// with lin_u = e_rate * heading and constant = -c2.
struct EnergyCbfEval {
  double h_E = 0.0;
  double quad_u = 0.0;
  Vec2 lin_u;
  double constant = 0.0;

  double rate(Vec2 u) const { return -quad_u * dot(u, u) + dot(lin_u, u) + constant; }
};

EnergyCbfEval energy_cbf_eval(double E, const ChargePath& path, const EnergyParams& energy);

/// Worst case over |u_j| <= u_max of the neighbours' share of h_s_i_dot:
///   delta_i = sum_j 2 u_max |int_A rho_N grad-flux(rho_j)| + 2 T int_A rho_N lap(rho_j)
/// where rho_local is rho_{N_i} (own belief plus neighbours).
double worst_case_delta(const ScalarField& rho_local, std::span<const RobotBelief* const> neighbors,
                        const CellMask& unsafe, double u_max, double diffusion_T);

/// Realized neighbour share -2 int_A rho_N rho_dot_j(u_j) for one neighbour.
double neighbor_contribution(const ScalarField& rho_local, const RobotBelief& neighbor, Vec2 u,
                             const CellMask& unsafe, double diffusion_T);

/// Sum of the beliefs' fields.
ScalarField total_density(std::span<const RobotBelief* const> robots, const GridSpec& grid);

}  // namespace wildfire
