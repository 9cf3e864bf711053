#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/solver_oracle.hpp"
#include "wildfire/conic_solver.hpp"

namespace wildfire {
namespace {

ConvexProgram single_velocity() {
  ConvexProgram p(1, 0, false);
  p.u_max = {10.0};
  return p;
}

TEST(ConicSolver, UnconstrainedMinimumIsZero) {
  const ConvexProgram p = single_velocity();
  const Solution sol = solve(p);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal);
  EXPECT_NEAR(sol.u(p, 0).x, 0.0, 1e-8);
  EXPECT_NEAR(sol.u(p, 0).y, 0.0, 1e-8);
  EXPECT_NEAR(p.objective(sol.x), 0.0, 1e-8);
}

TEST(ConicSolver, HalfSpaceProjection) {
  ConvexProgram p = single_velocity();
  LinearRow& row = p.add_linear("halfspace");  // u_x >= 1  <=>  -u_x <= -1
  row.coeffs = {-1.0, 0.0};
  row.rhs = -1.0;
  const Solution sol = solve(p);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal);
  EXPECT_NEAR(sol.u(p, 0).x, 1.0, 1e-8);
  EXPECT_NEAR(sol.u(p, 0).y, 0.0, 1e-8);
  EXPECT_NEAR(sol.multipliers.linear[0], 2.0, 1e-6);
  EXPECT_LE(kkt_residual(p, sol), 1e-8);
}

TEST(ConicSolver, BallProjection) {
  // min |u - (3, 0)|^2 shifted into the objective: |u|^2 - 6 u_x via a slack-free
  // linear pull is not expressible, so use the ball against a half-space instead.
  ConvexProgram p(1, 0, false);
  p.u_max = {1.0};
  LinearRow& row = p.add_linear();
  row.coeffs = {-1.0, -1.0};  // u_x + u_y >= 1
  row.rhs = -1.0;
  const Solution sol = solve(p);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal);
  EXPECT_NEAR(sol.u(p, 0).x, 0.5, 1e-8);
  EXPECT_NEAR(sol.u(p, 0).y, 0.5, 1e-8);
  EXPECT_LE(kkt_residual(p, sol), 1e-8);
}

TEST(ConicSolver, DetectsInfeasibleBallAndHalfSpace) {
  ConvexProgram p(1, 0, false);
  p.u_max = {1.0};
  LinearRow& row = p.add_linear();
  row.coeffs = {-1.0, 0.0};  // u_x >= 2
  row.rhs = -2.0;
  const Solution sol = solve(p);
  EXPECT_EQ(sol.status, SolveStatus::kInfeasible);
  EXPECT_LT(sol.certificate_residual, 1e-6);
}

TEST(ConicSolver, ConstantRowViolationIsInfeasible) {
  ConvexProgram p = single_velocity();
  p.add_linear().rhs = -1.0;
  EXPECT_EQ(solve(p).status, SolveStatus::kInfeasible);
}

TEST(ConicSolver, KktResidualReportsPrimalViolation) {
  ConvexProgram p = single_velocity();
  LinearRow& row = p.add_linear();
  row.coeffs = {-1.0, 0.0};
  row.rhs = -1.0;
  Solution cand;
  cand.x = {0.0, 0.0};
  cand.multipliers.linear = {0.0};
  cand.multipliers.ball = {0.0};
  EXPECT_DOUBLE_EQ(kkt_residual(p, cand), 1.0);

  const Solution opt = solve(p);
  Solution perturbed = opt;
  perturbed.x[1] += 1e-3;
  EXPECT_GT(kkt_residual(p, perturbed), kkt_residual(p, opt));
}

TEST(ConicSolver, QuadraticRowActive) {
  // |u|^2 - 2 u_x <= -0.75 is the disc of radius 1/2 around (1, 0).
  ConvexProgram p = single_velocity();
  QuadraticRow& q = p.add_quadratic(0, 1.0);
  q.coeffs = {-2.0, 0.0};
  q.rhs = -0.75;
  const Solution sol = solve(p);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal);
  EXPECT_NEAR(sol.u(p, 0).x, 0.5, 1e-7);
  EXPECT_NEAR(sol.u(p, 0).y, 0.0, 1e-7);
  EXPECT_LE(sol.kkt_residual, 1e-6);
}

TEST(ConicSolver, SlackAbsorbsOnlyWhatIsNeeded) {
  // u_x - s >= 2 with |u| <= 1 forces s = 1 when gamma is large.
  ConvexProgram p(1, 0, true);
  p.u_max = {1.0};
  p.gamma = 100.0;
  LinearRow& row = p.add_linear();
  row.coeffs = {-1.0, 0.0, -1.0};
  row.rhs = -2.0;
  const Solution sol = solve(p);
  ASSERT_TRUE(sol.ok());
  EXPECT_NEAR(sol.s(p), 1.0, 1e-6);
  EXPECT_NEAR(sol.u(p, 0).x, 1.0, 1e-6);
}

TEST(ConicSolver, SlackMonotoneInGamma) {
  ConvexProgram p(1, 0, true);
  p.u_max = {2.0};
  LinearRow& row = p.add_linear();
  row.coeffs = {-1.0, -0.5, -1.0};
  row.rhs = -1.5;
  double prev = std::numeric_limits<double>::infinity();
  for (double gamma : {0.1, 0.5, 1.0, 2.0, 4.0, 10.0}) {
    p.gamma = gamma;
    const Solution sol = solve(p);
    ASSERT_TRUE(sol.ok());
    EXPECT_LE(sol.s(p), prev + 1e-7) << "gamma=" << gamma;
    prev = sol.s(p);
  }
}

TEST(ConicSolver, Deterministic) {
  std::mt19937_64 rng(7);
  const auto sp = testing::random_separable_program(rng, 3);
  const ConvexProgram p = sp.to_program();
  const Solution a = solve(p), b = solve(p);
  ASSERT_EQ(a.x.size(), b.x.size());
  for (std::size_t i = 0; i < a.x.size(); ++i) EXPECT_EQ(a.x[i], b.x[i]);
}

TEST(ConicSolver, RowScalingInvariance) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sp = testing::random_separable_program(rng, 3);
    ConvexProgram p = sp.to_program();
    ConvexProgram scaled = p;
    for (auto& r : scaled.linear) {
      for (double& c : r.coeffs) c *= 10.0;
      r.rhs *= 10.0;
    }
    for (auto& r : scaled.quadratic) {
      for (double& c : r.coeffs) c *= 10.0;
      r.quad *= 10.0;
      r.rhs *= 10.0;
    }
    const Solution a = solve(p), b = solve(scaled);
    ASSERT_TRUE(a.ok());
    ASSERT_TRUE(b.ok());
    for (int i = 0; i < 2 * p.robots; ++i)
      EXPECT_NEAR(a.x[static_cast<std::size_t>(i)], b.x[static_cast<std::size_t>(i)], 1e-6);
  }
}

TEST(ConicSolver, MatchesGridSearchOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const auto sp = testing::random_separable_program(rng, 3);
    const ConvexProgram p = sp.to_program();
    const Solution sol = solve(p);
    ASSERT_EQ(sol.status, SolveStatus::kOptimal) << "trial " << trial;
    EXPECT_LE(sol.kkt_residual, 1e-6);
    EXPECT_LE(p.objective(sol.x), testing::oracle_cost(sp) + 1e-9) << "trial " << trial;
    EXPECT_LE(testing::oracle_distance(sp, p, sol), 5e-3) << "trial " << trial;
  }
}

TEST(ConicSolver, RejectsNonConvexRow) {
  ConvexProgram p = single_velocity();
  p.add_quadratic(0, -1.0);
  EXPECT_THROW(solve(p), std::invalid_argument);
}

}  // namespace
}  // namespace wildfire
