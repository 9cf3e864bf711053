#include <gtest/gtest.h>

#include <vector>

#include "support/planner_oracle.hpp"
#include "wildfire/charge_planner.hpp"

namespace wildfire {
namespace {

const ChargerRegion kCharger{{-1.2, -1.2}, 0.5};

ChargePath polyline(std::vector<Vec2> w, const EnergyParams& e, double u_plan) {
  ChargePath p;
  p.waypoints = std::move(w);
  p.u_plan = u_plan;
  p.e_rate = e.rate_per_metre(u_plan);
  p.P = path_energy(p, e, u_plan);
  return p;
}

TEST(PathEnergy, Examples) {
  const EnergyParams e{0.01, 0.005, 0.1, 0.3};
  EXPECT_EQ(path_energy(polyline({{0.0, 0.0}}, e, 0.5), e, 0.5), 0.0);
  EXPECT_NEAR(path_energy(polyline({{0.0, 0.0}, {1.0, 0.0}}, e, 0.5), e, 0.5), 0.015, 1e-15);
  EXPECT_NEAR(path_energy(polyline({{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}}, e, 0.5), e, 0.5), 0.030, 1e-15);
}

TEST(ChargerRegion, ValidateInsideDomain) {
  const GridSpec g = GridSpec::square(4.0, 0.1);
  EXPECT_NO_THROW(kCharger.validate(g));
  EXPECT_ANY_THROW((ChargerRegion{{1.8, 0.0}, 0.5}.validate(g)));
}

class PathAdvanceTest : public ::testing::Test {
 protected:
  EnergyParams e{0.1, 0.05, 0.1, 0.3};
  ChargePath path = polyline({{1.0, 0.0}, {0.5, 0.0}, {0.0, 0.0}, {-0.5, -0.5}, {-1.2, -1.2}}, e, 0.5);
};

TEST_F(PathAdvanceTest, AtSecondWaypointDropsTheFirstTwo) {
  const PathAdvance a = path_advance(path, {0.5, 0.0}, kCharger, 0.3);
  EXPECT_FALSE(a.replan);
  ASSERT_EQ(a.path.waypoints.size(), 4u);
  EXPECT_EQ(a.path.waypoints[0], (Vec2{0.5, 0.0}));
  EXPECT_EQ(a.path.waypoints[1], (Vec2{0.0, 0.0}));
  EXPECT_NEAR(a.path.P, path.P - 0.5 * path.e_rate, 1e-12);
}

TEST_F(PathAdvanceTest, UnmovedKeepsEnergy) {
  const PathAdvance a = path_advance(path, {1.0, 0.0}, kCharger, 0.3);
  EXPECT_FALSE(a.replan);
  EXPECT_NEAR(a.path.P, path.P, 1e-12);
  EXPECT_EQ(a.path.waypoints, path.waypoints);
}

TEST_F(PathAdvanceTest, StrayRaisesReplan) {
  const PathAdvance a = path_advance(path, {0.75, 0.5}, kCharger, 0.3);
  EXPECT_TRUE(a.replan);
  EXPECT_NEAR(a.offset, 0.5, 1e-12);
}

TEST_F(PathAdvanceTest, ProgressNeverIncreasesEnergy) {
  double prev = path.P;
  ChargePath p = path;
  for (double x = 0.95; x >= 0.0; x -= 0.05) {
    p = path_advance(p, {x, 0.01}, kCharger, 0.3).path;
    EXPECT_LE(p.P, prev + 1e-12);
    prev = p.P;
  }
}

TEST_F(PathAdvanceTest, InsideChargerIsEmptyPath) {
  const PathAdvance a = path_advance(path, {-1.1, -1.1}, kCharger, 0.3);
  EXPECT_EQ(a.path.waypoints.size(), 1u);
  EXPECT_EQ(a.path.P, 0.0);
}

TEST(RrtPlan, StartInsideChargerIsTrivial) {
  testing::PlanningCase c = testing::obstacle_free_case(1);
  c.start = {-1.3, -1.1};
  const auto plan = rrt_plan(c.start, c.cfg.charger, c.safety, c.grid, c.cfg.planner, c.cfg.control.energy, 1);
  ASSERT_TRUE(plan.has_value());
  EXPECT_EQ(plan->waypoints.size(), 1u);
  EXPECT_EQ(plan->P, 0.0);
}

TEST(RrtPlan, ObstacleFreeNearStraight) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const testing::PlanOutcome o = testing::run_case(testing::obstacle_free_case(seed), seed);
    ASSERT_TRUE(o.found) << "seed " << seed;
    EXPECT_TRUE(o.ends_in_charger) << "seed " << seed;
    EXPECT_TRUE(o.verified) << "seed " << seed;
    EXPECT_LE(o.length, 1.2 * o.straight) << "seed " << seed;
  }
}

TEST(RrtPlan, DetoursAroundFireSafely) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const testing::PlanningCase c = testing::fire_case(seed);
    const testing::PlanOutcome o = testing::run_case(c, seed);
    ASSERT_TRUE(o.found) << "seed " << seed;
    EXPECT_TRUE(o.ends_in_charger) << "seed " << seed;
    EXPECT_TRUE(o.verified) << "seed " << seed;
  }
}

TEST(RrtPlan, SeededDeterminism) {
  const testing::PlanningCase c = testing::fire_case(3);
  const auto a = rrt_plan(c.start, c.cfg.charger, c.safety, c.grid, c.cfg.planner, c.cfg.control.energy, 42);
  const auto b = rrt_plan(c.start, c.cfg.charger, c.safety, c.grid, c.cfg.planner, c.cfg.control.energy, 42);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->waypoints, b->waypoints);
  EXPECT_EQ(a->P, b->P);
}

TEST(RrtPlan, PathEnergyConsistent) {
  const testing::PlanningCase c = testing::fire_case(5);
  const auto p = rrt_plan(c.start, c.cfg.charger, c.safety, c.grid, c.cfg.planner, c.cfg.control.energy, 5);
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->P, path_energy(*p, c.cfg.control.energy, p->u_plan), 1e-12);
  EXPECT_NEAR(p->e_rate, c.cfg.control.energy.rate_per_metre(p->u_plan), 1e-15);
}

TEST(VerifyPath, RejectsPathThroughFire) {
  const testing::PlanningCase c = testing::fire_case(7);
  const ChargePath through = polyline({c.start, {0.5, -0.4}, {-1.2, -1.2}}, c.cfg.control.energy, 0.5);
  EXPECT_FALSE(verify_path(through, c.cfg.charger, c.safety, c.grid, 10.0));
  const ChargePath short_of_goal = polyline({c.start, {-0.5, 1.5}}, c.cfg.control.energy, 0.5);
  EXPECT_FALSE(verify_path(short_of_goal, c.cfg.charger, c.safety, c.grid, 10.0));
}

TEST(CheckWaypoint, EmptyUnsafeIsEpsilon) {
  const testing::PlanningCase c = testing::obstacle_free_case(2);
  const WaypointCheck w = check_waypoint(c.safety, c.grid, {0.0, 0.0}, {0.5, 0.0}, 0.0);
  EXPECT_EQ(w.h, c.safety.epsilon);
}

}  // namespace
}  // namespace wildfire
