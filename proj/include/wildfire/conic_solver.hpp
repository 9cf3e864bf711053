#pragma once

#include <string>
#include <vector>

#include "wildfire/grid_field.hpp"

namespace wildfire {

/// coeffs . x <= rhs over the full decision vector.
struct LinearRow {
  std::vector<double> coeffs;
  double rhs = 0.0;
  std::string tag;
};

/// quad * |u_block|^2 + coeffs . x <= rhs, quad >= 0.
struct QuadraticRow {
  int block = 0;
  double quad = 0.0;
  std::vector<double> coeffs;
  double rhs = 0.0;
  std::string tag;
};

/// Per-step decision problem of the suppression controllers.
///
/// Decision vector layout: [u_0x, u_0y, ..., u_{R-1}x, u_{R-1}y, f_0, ..., f_{F-1}, s]
/// where s is present only when has_slack is set. The objective is
///   |u|^2 + zeta |f|^2 + gamma s + linear_cost . x
/// subject to the linear and quadratic rows, |u_i| <= u_max[i],
/// 0 <= f_j <= f_max[j] and s >= 0.
struct ConvexProgram {
  int robots = 0;
  int flows = 0;
  bool has_slack = false;
  double zeta = 0.0;
  double gamma = 0.0;
  std::vector<double> u_max;
  std::vector<double> f_max;
  std::vector<LinearRow> linear;
  std::vector<QuadraticRow> quadratic;
  std::vector<double> linear_cost;  // empty means zero

  ConvexProgram() = default;
  ConvexProgram(int robots, int flows, bool has_slack);

  int dim() const { return 2 * robots + flows + (has_slack ? 1 : 0); }
  int u_index(int robot) const { return 2 * robot; }
  int f_index(int flow) const { return 2 * robots + flow; }
  int s_index() const { return 2 * robots + flows; }

  LinearRow& add_linear(std::string tag = {});
  QuadraticRow& add_quadratic(int block, double quad, std::string tag = {});

  /// Objective value at a full decision vector.
  double objective(const std::vector<double>& x) const;
  void validate() const;
};

enum class SolveStatus { kOptimal, kOptimalLoose, kInfeasible, kMaxIter };

const char* to_string(SolveStatus s);

struct Multipliers {
  std::vector<double> linear;
  std::vector<double> quadratic;
  std::vector<double> ball;
  std::vector<double> flow_lower;
  std::vector<double> flow_upper;
  double slack_lower = 0.0;
};

struct Solution {
  SolveStatus status = SolveStatus::kMaxIter;
  std::vector<double> x;
  Multipliers multipliers;
  double kkt_residual = 0.0;
  /// Normalized infeasibility certificate |G'z| / |h'z| when infeasible.
  double certificate_residual = 0.0;
  int iterations = 0;

  Vec2 u(const ConvexProgram& p, int robot) const {
    return {x[static_cast<std::size_t>(p.u_index(robot))], x[static_cast<std::size_t>(p.u_index(robot) + 1)]};
  }
  double f(const ConvexProgram& p, int flow) const { return x[static_cast<std::size_t>(p.f_index(flow))]; }
  double s(const ConvexProgram& p) const { return p.has_slack ? x[static_cast<std::size_t>(p.s_index())] : 0.0; }
  bool ok() const { return status == SolveStatus::kOptimal || status == SolveStatus::kOptimalLoose; }
};

struct SolverSettings {
  double tol = 1e-11;
  int max_iter = 200;
  double strict_kkt = 1e-6;
  double loose_kkt = 1e-4;
};

/// Interior-point solve of the program's second-order-cone reformulation.
/// Deterministic; never throws on infeasible data.
Solution solve(const ConvexProgram& p, const SolverSettings& settings = {});

/// max(primal violation, dual violation, complementarity, stationarity)
/// of a primal-dual candidate in the program's original rows.
double kkt_residual(const ConvexProgram& p, const Solution& candidate);

/// Largest violation of any constraint at x (0 when feasible).
double primal_violation(const ConvexProgram& p, const std::vector<double>& x);

}  // namespace wildfire
