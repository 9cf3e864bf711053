#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support/field_oracles.hpp"
#include "wildfire/task_functions.hpp"

namespace wildfire {
namespace {

using testing::FieldState;
using testing::random_field_state;

const GridSpec kGrid = GridSpec::square(4.0, 0.1);

ChargePath straight(Vec2 from, Vec2 to, const EnergyParams& e, double u_plan) {
  ChargePath p;
  p.waypoints = {from, to};
  p.u_plan = u_plan;
  p.e_rate = e.rate_per_metre(u_plan);
  p.P = path_energy(p, e, u_plan);
  return p;
}

TEST(Clf, ValueMatchesPaddedPlaneIntegral) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const FieldState s = random_field_state(seed, 3);
    std::vector<ClfTerm> terms;
    ScalarField m(s.grid);
    for (std::size_t i = 0; i < s.beliefs.size(); ++i) {
      terms.push_back({&s.beliefs[i], s.water[i]});
      m.axpy(s.water[i], s.beliefs[i].field());
    }
    const double V = clf_eval(s.rho_d, terms, s.sigma_s, s.density.diffusion_T).V;
    EXPECT_NEAR(V, testing::plane_clf_V(s.rho_d, m, s.sigma_s), 1e-9 * V) << "seed " << seed;
  }
}

TEST(Clf, ZeroWhenWaterMatchesTarget) {
  // A robot at the center: rho_w has no mass past the domain edge.
  const DensityParams p{0.1, 0.001, 0.5};
  const RobotBelief b = make_belief({0.05, 0.05}, p, kGrid);
  const std::vector<WeightedDensity> w{{&b.density, 0.8}};
  const ScalarField rho_w = water_density(w, 0.3, kGrid);
  const std::vector<ClfTerm> terms{{&b, 0.8}};
  const ClfEval ev = clf_eval(rho_w, terms, 0.3, 0.001);
  EXPECT_NEAR(ev.V, 0.0, 1e-12);
  EXPECT_NEAR(ev.lin_u[0].x, 0.0, 1e-9);
  EXPECT_NEAR(ev.lin_u[0].y, 0.0, 1e-9);
  EXPECT_NEAR(ev.lin_f[0], 0.0, 1e-9);
}

TEST(Clf, LoneRobotHasNoPullTowardWalls) {
  // Without a target, V depends only on the shape of rho_w, not on where it
  // sits, so the motion coefficient vanishes. Within two cells of the wall
  // the zero-flux stencil leaves a small residual, which points inward
  // (u = -gamma/2 lin_u moves away from the wall).
  const DensityParams p{0.03, 0.001, 0.5};
  for (const Vec2 x : {Vec2{1.6, 1.6}, Vec2{-1.7, 0.2}, Vec2{0.0, 0.0}, Vec2{1.85, 0.03}, Vec2{0.03, -1.95}}) {
    const RobotBelief b = make_belief(x, p, kGrid);
    const std::vector<ClfTerm> terms{{&b, 1.0}};
    const ClfEval ev = clf_eval(ScalarField(kGrid), terms, 0.3, 0.001);
    EXPECT_GT(ev.V, 0.0);
    EXPECT_GT(ev.lin_f[0], 0.0);  // spraying without a target only adds error
    const double wall = std::max(std::abs(x.x), std::abs(x.y));
    if (wall < 1.75) EXPECT_LE(norm(ev.lin_u[0]), 1e-12) << x.x << "," << x.y;
    else EXPECT_GE(dot(ev.lin_u[0], x), 0.0) << x.x << "," << x.y;
  }
}

TEST(Clf, RestingSwarmHasNoCoefficients) {
  const FieldState s = random_field_state(4, 3);
  std::vector<ClfTerm> terms;
  for (const RobotBelief& b : s.beliefs) terms.push_back({&b, 0.0});
  const ClfEval ev = clf_eval(ScalarField(s.grid), terms, s.sigma_s, s.density.diffusion_T);
  EXPECT_EQ(ev.V, 0.0);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    EXPECT_EQ(ev.lin_u[i].x, 0.0);
    EXPECT_EQ(ev.lin_u[i].y, 0.0);
    EXPECT_EQ(ev.lin_f[i], 0.0);
    EXPECT_EQ(ev.drift[i], 0.0);
  }
}

TEST(Clf, FlowCoefficientMatchesDirectIntegral) {
  // V_dot_f = int_plane (rho_d - K * w rho) (-K * rho) by explicit double
  // sums with an untruncated kernel over the domain padded by 1 m.
  const GridSpec g = GridSpec::square(2.0, 0.1);
  const DensityParams p{0.1, 0.0, 0.5};
  const RobotBelief b = make_belief({0.05, 0.05}, p, g);
  const ScalarField rho_d(g, 2.0);
  const double w = 0.2, s2 = 2 * 0.3 * 0.3, a = g.cell_area();
  const std::vector<ClfTerm> terms{{&b, w}};
  const ClfEval ev = clf_eval(rho_d, terms, 0.3, 0.0);
  const int pad = 10;
  double direct = 0.0;
  for (int j = -pad; j < g.ny + pad; ++j)
    for (int i = -pad; i < g.nx + pad; ++i) {
      const bool inside = i >= 0 && j >= 0 && i < g.nx && j < g.ny;
      double Kr = 0.0;
      for (int l = 0; l < g.ny; ++l)
        for (int k = 0; k < g.nx; ++k) {
          const Vec2 d = g.center(i, j) - g.center(k, l);
          Kr += std::exp(-dot(d, d) / s2) * b.field()(k, l) * a;
        }
      const double e = (inside ? rho_d(i, j) : 0.0) - w * Kr;
      direct -= e * Kr * a;
    }
  EXPECT_LT(ev.lin_f[0], 0.0);
  EXPECT_NEAR(ev.lin_f[0], direct, 1e-7 * std::abs(direct));
}

TEST(Clf, MotionRateMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
    EXPECT_LE(testing::clf_fd_error(random_field_state(seed, 3), 1e-3), 1e-2) << "seed " << seed;
}

TEST(SafetyCbf, EmptyUnsafeSet) {
  const FieldState s = random_field_state(5, 2);
  const auto ptrs = s.belief_ptrs();
  const SafetyCbfEval ev = safety_cbf_eval(ptrs, CellMask(s.grid), 0.05, 0.001);
  EXPECT_EQ(ev.h, 0.05);
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    EXPECT_EQ(ev.lin_u[i].x, 0.0);
    EXPECT_EQ(ev.lin_u[i].y, 0.0);
    EXPECT_EQ(ev.drift[i], 0.0);
  }
}

TEST(SafetyCbf, NoMassOnUnsafeSet) {
  const DensityParams p{0.1, 0.0, 0.5};
  const RobotBelief far = make_belief({-1.5, -1.5}, p, kGrid);
  CellMask A(kGrid);
  A.set(30, 30, true);
  const std::vector<const RobotBelief*> ptrs{&far};
  EXPECT_EQ(safety_cbf_eval(ptrs, A, 0.05, 0.0).h, 0.05);
}

TEST(SafetyCbf, ReconstructsIntegral) {
  const FieldState s = random_field_state(6, 3);
  const auto ptrs = s.belief_ptrs();
  const ScalarField rho = total_density(ptrs, s.grid);
  double direct = 0.0;
  for (std::size_t k = 0; k < rho.size(); ++k)
    if (s.unsafe[k]) direct += rho[k] * rho[k];
  direct *= s.grid.cell_area();
  EXPECT_NEAR(safety_cbf_eval(ptrs, s.unsafe, 0.05, 0.001).h, 0.05 - direct, 1e-9);
}

TEST(SafetyCbf, RateMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
    EXPECT_LE(testing::safety_fd_error(random_field_state(seed, 3), 1e-3), 1e-2) << "seed " << seed;
}

TEST(SafetyCbf, ForwardDifferenceBiasIsFirstOrder) {
  using testing::Difference;
  const FieldState s = random_field_state(3, 3);
  const double e1 = testing::safety_fd_error(s, 1e-3, Difference::kForward);
  const double e2 = testing::safety_fd_error(s, 5e-4, Difference::kForward);
  EXPECT_NEAR(e1 / e2, 2.0, 0.05);
}

TEST(EnergyCbf, InsideChargerAndHover) {
  const EnergyParams e{0.01, 0.005, 0.1, 0.3};
  ChargePath at;
  at.waypoints = {{-1.2, -1.2}};
  at.u_plan = 0.5;
  at.e_rate = e.rate_per_metre(0.5);
  at.P = path_energy(at, e, 0.5);
  EXPECT_EQ(at.P, 0.0);
  const EnergyCbfEval ev = energy_cbf_eval(0.7, at, e);
  EXPECT_NEAR(ev.h_E, 0.6, 1e-15);
  EXPECT_EQ(ev.rate({0.0, 0.0}), -e.c2);
}

TEST(EnergyCbf, RidingTheStraightPathKeepsMargin) {
  const EnergyParams e{0.01, 0.005, 0.1, 0.3};
  const double u_max = 0.5;
  const ChargePath p = straight({0.0, 0.0}, {-1.0, 0.0}, e, u_max);
  EXPECT_NEAR(p.P, (0.01 * 0.25 + 0.005) * 2.0, 1e-15);
  const EnergyCbfEval ev = energy_cbf_eval(0.9, p, e);
  EXPECT_NEAR(ev.h_E, 0.9 - 0.1 - p.P, 1e-15);
  EXPECT_NEAR(ev.rate({-u_max, 0.0}), 0.0, 1e-15);
  EXPECT_LT(ev.rate({u_max, 0.0}), 0.0);
}

TEST(EnergyCbf, RateMatchesBatteryAndPathChange) {
  // h_E(t+dt) - h_E(t) = -(c1|u|^2 + c2) dt + e_rate * (distance closed).
  const EnergyParams e{0.1, 0.05, 0.1, 0.3};
  const Vec2 x{0.4, 0.2}, goal{-1.2, -1.2};
  const ChargePath p = straight(x, goal, e, 0.5);
  const EnergyCbfEval ev = energy_cbf_eval(0.8, p, e);
  const Vec2 u{-0.3, -0.1};
  const double dt = 1e-4;
  const ChargePath q = straight(x + dt * u, goal, e, 0.5);
  const double h_next = 0.8 - (e.c1 * dot(u, u) + e.c2) * dt - e.E_min - q.P;
  EXPECT_NEAR((h_next - ev.h_E) / dt, ev.rate(u), 1e-6);
}

TEST(Delta, NoNeighborsIsZero) {
  const FieldState s = random_field_state(7, 1);
  const auto ptrs = s.belief_ptrs();
  EXPECT_EQ(worst_case_delta(total_density(ptrs, s.grid), {}, s.unsafe, 0.5, 0.001), 0.0);
}

TEST(Delta, FarNeighborContributesOnlyDiffusion) {
  const FieldState s = random_field_state(8, 1);
  const RobotBelief far = make_belief({1.95, 1.95}, s.density, s.grid);
  ScalarField rho = s.beliefs[0].field();
  rho += far.field();
  ASSERT_FALSE(s.unsafe(39, 39));
  const std::vector<const RobotBelief*> n{&far};
  EXPECT_NEAR(worst_case_delta(rho, n, s.unsafe, 0.5, 0.0), 0.0, 1e-12);
  EXPECT_NEAR(neighbor_contribution(rho, far, {0.5, 0.0}, s.unsafe, 0.0), 0.0, 1e-12);
}

TEST(Delta, SoundUnderSampledVelocities) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const testing::DeltaCheck c = testing::delta_soundness(random_field_state(100 + seed, 4), 1000, seed);
    EXPECT_EQ(c.violations, 0) << "seed " << seed << " worst " << c.worst_margin;
  }
}

TEST(Delta, TightAtWorstVelocity) {
  const FieldState s = random_field_state(9, 2);
  const auto ptrs = s.belief_ptrs();
  const ScalarField rho = total_density(ptrs, s.grid);
  const RobotBelief& nb = s.beliefs[1];
  const Vec2 g{inner(rho, nb.ops.div_x, s.unsafe), inner(rho, nb.ops.div_y, s.unsafe)};
  ASSERT_GT(norm(g), 0.0);
  const Vec2 worst = (-0.5 / norm(g)) * g;
  const std::vector<const RobotBelief*> n{&nb};
  const double delta = worst_case_delta(rho, n, s.unsafe, 0.5, 0.001);
  EXPECT_NEAR(neighbor_contribution(rho, nb, worst, s.unsafe, 0.001), -delta, 1e-12 * std::max(1.0, delta));
}

}  // namespace
}  // namespace wildfire
