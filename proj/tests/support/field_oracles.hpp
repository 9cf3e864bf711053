#pragma once

// Random closed-loop-like states and the finite-difference / sampling oracles
// for the task functions. Shared by the unit tests and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "wildfire/fire_model.hpp"
#include "wildfire/swarm_density.hpp"
#include "wildfire/task_functions.hpp"

namespace wildfire::testing {

struct FieldState {
  GridSpec grid = GridSpec::square(4.0, 0.1);
  RegionThresholds th{300.5, 302.5, 301.0};
  DensityParams density{0.1, 0.001, 0.5};
  double sigma_s = 0.3;
  double epsilon = 0.05;
  ScalarField T;
  CellMask unsafe;
  ScalarField rho_d;
  std::vector<Vec2> positions;
  std::vector<double> water;
  std::vector<RobotBelief> beliefs;
  std::vector<Vec2> u;

  std::vector<const RobotBelief*> belief_ptrs() const {
    std::vector<const RobotBelief*> p;
    for (const RobotBelief& b : beliefs) p.push_back(&b);
    return p;
  }
};

inline Vec2 random_velocity(std::mt19937_64& rng, double u_max) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double a = 2 * M_PI * U(rng), r = u_max * std::sqrt(U(rng));
  return {r * std::cos(a), r * std::sin(a)};
}

/// One to three fires with robots scattered around them so their beliefs
/// overlap the unsafe set and the deployment band.
inline FieldState random_field_state(std::uint64_t seed, int robots) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  FieldState s;
  std::vector<Vec2> centers;
  const int fires = 1 + static_cast<int>(3 * U(rng)) % 3;
  for (int k = 0; k < fires; ++k) centers.push_back({-1.0 + 2.0 * U(rng), -1.0 + 2.0 * U(rng)});
  s.T = ignite(s.grid, 300.0, centers, 2.8 + 0.6 * U(rng), 0.15 + 0.1 * U(rng)).T;
  s.unsafe = unsafe_region(s.T, s.th);
  s.rho_d = target_density(s.T, s.th, 1.0 + 4.0 * U(rng));
  for (int i = 0; i < robots; ++i) {
    const Vec2 c = centers[static_cast<std::size_t>(i) % centers.size()];
    const double a = 2 * M_PI * U(rng), r = 0.05 + 0.35 * U(rng);
    const Vec2 x = s.grid.clamp({c.x + r * std::cos(a), c.y + r * std::sin(a)});
    s.positions.push_back(x);
    s.water.push_back(0.2 + 0.8 * U(rng));
    s.beliefs.push_back(make_belief(x, s.density, s.grid));
    s.u.push_back(random_velocity(rng, s.density.u_max));
  }
  return s;
}

inline double relative_error(double approx, double exact) {
  return std::abs(approx - exact) / std::max(std::abs(exact), 1e-12);
}

/// Beliefs advanced by one explicit Fokker-Planck step under s.u.
inline std::vector<ScalarField> advanced_fields(const FieldState& s, double dt) {
  std::vector<ScalarField> out;
  for (std::size_t i = 0; i < s.beliefs.size(); ++i) {
    ScalarField f = s.beliefs[i].field();
    f.axpy(dt, s.beliefs[i].ops.rate(s.u[i], s.density.diffusion_T));
    out.push_back(std::move(f));
  }
  return out;
}

enum class Difference { kForward, kCentral };

inline double safety_h_at(const FieldState& s, double dt) {
  ScalarField rho(s.grid);
  for (const ScalarField& f : advanced_fields(s, dt)) rho += f;
  return s.epsilon - inner(rho, rho, s.unsafe);
}

/// 1/2 int (rho_d - K * m)^2 over the plane, evaluated directly on a grid
/// padded by 2 m (beyond the kernel reach) on every side.
inline double plane_clf_V(const ScalarField& rho_d, const ScalarField& m, double sigma_s) {
  const GridSpec& g = rho_d.spec();
  const int pad = static_cast<int>(std::lround(2.0 / g.h));
  const GridSpec big{g.nx + 2 * pad, g.ny + 2 * pad, g.h, {g.origin.x - pad * g.h, g.origin.y - pad * g.h}};
  ScalarField d(big), w(big);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      d(i + pad, j + pad) = rho_d(i, j);
      w(i + pad, j + pad) = m(i, j);
    }
  const ScalarField e = d - convolve(w, sigma_s);
  return 0.5 * inner(e, e);
}

inline double clf_V_at(const FieldState& s, double dt) {
  ScalarField weighted(s.grid);
  const auto next = advanced_fields(s, dt);
  for (std::size_t i = 0; i < next.size(); ++i) weighted.axpy(s.water[i], next[i]);
  return plane_clf_V(s.rho_d, weighted, s.sigma_s);
}

template <class Fn>
double difference(Fn at, double dt, Difference kind) {
  return kind == Difference::kForward ? (at(dt) - at(0.0)) / dt : (at(dt) - at(-dt)) / (2 * dt);
}

/// Relative error of the analytic h_s_dot against a finite difference in time.
/// Both h_s and V are quadratic in the densities, so the central difference
/// is exact up to rounding while the forward one carries an O(dt) bias.
inline double safety_fd_error(const FieldState& s, double dt, Difference kind = Difference::kCentral) {
  const auto ptrs = s.belief_ptrs();
  const SafetyCbfEval ev = safety_cbf_eval(ptrs, s.unsafe, s.epsilon, s.density.diffusion_T);
  return relative_error(difference([&](double t) { return safety_h_at(s, t); }, dt, kind), ev.rate(s.u));
}

/// Same for the motion part of V_dot (all flows zero).
inline double clf_fd_error(const FieldState& s, double dt, Difference kind = Difference::kCentral) {
  std::vector<ClfTerm> terms;
  for (std::size_t i = 0; i < s.beliefs.size(); ++i) terms.push_back({&s.beliefs[i], s.water[i]});
  const ClfEval ev = clf_eval(s.rho_d, terms, s.sigma_s, s.density.diffusion_T);
  const std::vector<double> f(s.beliefs.size(), 0.0);
  return relative_error(difference([&](double t) { return clf_V_at(s, t); }, dt, kind), ev.rate(s.u, f));
}

struct DeltaCheck {
  int samples = 0;
  int violations = 0;
  double worst_margin = 0.0;  // min over samples of realized + delta
};

/// Robot 0 is "self"; the rest are its neighbours. Samples joint neighbour
/// velocities in the admissible ball (a quarter of them on the boundary).
inline DeltaCheck delta_soundness(const FieldState& s, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto ptrs = s.belief_ptrs();
  const ScalarField rho_local = total_density(ptrs, s.grid);
  const std::vector<const RobotBelief*> neighbors(ptrs.begin() + 1, ptrs.end());
  const double delta = worst_case_delta(rho_local, neighbors, s.unsafe, s.density.u_max, s.density.diffusion_T);
  DeltaCheck out;
  out.worst_margin = INFINITY;
  for (int n = 0; n < samples; ++n) {
    double realized = 0.0;
    for (const RobotBelief* b : neighbors) {
      Vec2 u = random_velocity(rng, s.density.u_max);
      if (n % 4 == 0 && norm(u) > 0.0) u = (s.density.u_max / norm(u)) * u;
      realized += neighbor_contribution(rho_local, *b, u, s.unsafe, s.density.diffusion_T);
    }
    const double margin = realized + delta;
    out.worst_margin = std::min(out.worst_margin, margin);
    ++out.samples;
    if (margin < -1e-12 * std::max(1.0, std::abs(delta))) ++out.violations;
  }
  return out;
}

}  // namespace wildfire::testing
