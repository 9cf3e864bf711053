#include <gtest/gtest.h>

#include <vector>

#include "wildfire/local_knowledge.hpp"

namespace wildfire {
namespace {

const GridSpec kGrid = GridSpec::square(4.0, 0.1);
const RegionThresholds kTh{300.5, 302.5, 301.0};
constexpr double kTa = 300.0;

ScalarField hot_field() {
  ScalarField T(kGrid, kTa);
  for (int j = 0; j < kGrid.ny; ++j)
    for (int i = 0; i < kGrid.nx; ++i) T(i, j) = kTa + 0.1 * i + 0.01 * j;
  return T;
}

TEST(NeighborGraph, Examples) {
  const std::vector<Vec2> apart{{0.0, 0.0}, {1.2, 0.0}};
  EXPECT_FALSE(neighbor_graph(apart, 1.1).connected(0, 1));
  const std::vector<Vec2> same{{0.3, 0.3}, {0.3, 0.3}};
  EXPECT_TRUE(neighbor_graph(same, 1.1).connected(0, 1));
  const std::vector<Vec2> edge{{0.0, 0.0}, {1.1, 0.0}};
  EXPECT_TRUE(neighbor_graph(edge, 1.1).connected(0, 1));
}

TEST(NeighborGraph, SymmetricWithoutSelfLoops) {
  const std::vector<Vec2> p{{0, 0}, {0.5, 0.5}, {1.5, 0.2}, {-1.0, -1.0}, {0.9, 0.9}};
  const NeighborGraph g = neighbor_graph(p, 1.1);
  for (int i = 0; i < 5; ++i) {
    EXPECT_FALSE(g.connected(i, i));
    for (int j = 0; j < 5; ++j) {
      EXPECT_EQ(g.connected(i, j), g.connected(j, i));
      if (i != j) EXPECT_EQ(g.connected(i, j), distance(p[i], p[j]) <= 1.1);
    }
  }
}

TEST(Sense, FullCoverage) {
  const ScalarField T = hot_field();
  const LocalMap m = sense(LocalMap(kGrid, kTa), T, {0.0, 0.0}, 3.0);
  for (std::size_t k = 0; k < kGrid.size(); ++k) {
    EXPECT_EQ(m.certainty[k], 1.0);
    EXPECT_EQ(m.T_est[k], T[k]);
    EXPECT_EQ(m.provenance[k], Provenance::kOwn);
  }
}

TEST(Sense, CellBeyondRadiusUntouched) {
  const ScalarField T = hot_field();
  const Vec2 x = kGrid.center(20, 20);
  const LocalMap m = sense(LocalMap(kGrid, kTa), T, x, 0.5);
  EXPECT_EQ(m.certainty[kGrid.index(25, 20)], 1.0);
  EXPECT_EQ(m.certainty[kGrid.index(26, 20)], 0.0);
  EXPECT_EQ(m.T_est(26, 20), kTa);
}

TEST(Decay, LinearToZeroAndReset) {
  const ScalarField T = hot_field();
  LocalMap m = sense(LocalMap(kGrid, kTa), T, {0.0, 0.0}, 3.0);
  const double lambda = 0.05;
  m = decay(m, 10.0, lambda, kTa);
  EXPECT_NEAR(m.certainty[0], 0.5, 1e-15);
  EXPECT_EQ(m.T_est[5], T[5]);
  m = decay(m, 10.0, lambda, kTa);
  EXPECT_EQ(m.certainty[0], 0.0);
  EXPECT_EQ(m.T_est[5], kTa);
}

TEST(Decay, ZeroRateIsIdentityAndSenseRefreshes) {
  const ScalarField T = hot_field();
  const LocalMap m = sense(LocalMap(kGrid, kTa), T, {0.0, 0.0}, 1.0);
  const LocalMap same = decay(m, 5.0, 0.0, kTa);
  EXPECT_EQ(same.certainty, m.certainty);
  const LocalMap refreshed = sense(decay(m, 3.0, 0.05, kTa), T, {0.0, 0.0}, 1.0);
  EXPECT_EQ(refreshed.certainty, m.certainty);
  for (std::size_t k = 0; k < kGrid.size(); ++k) EXPECT_EQ(refreshed.T_est[k], m.T_est[k]);
}

TEST(Share, OneHopOnly) {
  // Chain 0 - 1 - 2: robot 2's observations reach 1 but never 0.
  const std::vector<Vec2> p{{-1.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}};
  const NeighborGraph g = neighbor_graph(p, 1.05);
  ASSERT_TRUE(g.connected(0, 1));
  ASSERT_TRUE(g.connected(1, 2));
  ASSERT_FALSE(g.connected(0, 2));
  const ScalarField T = hot_field();
  std::vector<LocalMap> maps;
  for (const Vec2 x : p) maps.push_back(sense(LocalMap(kGrid, kTa), T, x, 0.3));
  const std::size_t far_cell = kGrid.index(kGrid.cell_of({1.2, 0.05})[0], kGrid.cell_of({1.2, 0.05})[1]);
  for (int round = 0; round < 5; ++round) maps = share_one_hop(maps, g);
  EXPECT_EQ(maps[1].certainty[far_cell], 1.0);
  EXPECT_EQ(maps[1].provenance[far_cell], Provenance::kReceived);
  EXPECT_EQ(maps[0].certainty[far_cell], 0.0);
  EXPECT_EQ(maps[0].T_est[far_cell], kTa);
}

TEST(Share, EmptyNeighborChangesNothing) {
  const std::vector<Vec2> p{{0.0, 0.0}, {0.5, 0.0}};
  const NeighborGraph g = neighbor_graph(p, 1.1);
  const LocalMap mine = sense(LocalMap(kGrid, kTa), hot_field(), p[0], 0.4);
  const std::vector<LocalMap> out = share_one_hop({mine, LocalMap(kGrid, kTa)}, g);
  EXPECT_EQ(out[0].certainty, mine.certainty);
  EXPECT_EQ(out[0].provenance, mine.provenance);
}

TEST(Share, HigherCertaintyWins) {
  const std::vector<Vec2> p{{0.0, 0.0}, {0.5, 0.0}};
  const NeighborGraph g = neighbor_graph(p, 1.1);
  LocalMap a(kGrid, kTa), b(kGrid, kTa);
  a.T_est[7] = 301.0;
  a.certainty[7] = 0.9;
  b.T_est[7] = 305.0;
  b.certainty[7] = 0.4;
  const std::vector<LocalMap> out = share_one_hop({a, b}, g);
  EXPECT_EQ(out[0].T_est[7], 301.0);
  EXPECT_EQ(out[1].T_est[7], 301.0);
  EXPECT_EQ(out[1].certainty[7], 0.9);
  EXPECT_EQ(out[1].provenance[7], Provenance::kReceived);
}

TEST(Share, FullKnowledgeDegeneratesToGlobal) {
  const ScalarField T = hot_field();
  const std::vector<Vec2> p{{-1.5, -1.5}, {1.5, 1.5}, {0.0, 0.0}};
  std::vector<LocalMap> maps;
  for (const Vec2 x : p) maps.push_back(sense(LocalMap(kGrid, kTa), T, x, 6.0));
  maps = share_one_hop(maps, neighbor_graph(p, 6.0));
  for (const LocalMap& m : maps)
    for (std::size_t k = 0; k < kGrid.size(); ++k) EXPECT_EQ(m.T_est[k], T[k]);
}

TEST(Broadcast, MatchesUnsafeRegion) {
  EXPECT_TRUE(broadcast_unsafe(ScalarField(kGrid, kTa), kTh).empty());
  const ScalarField T = hot_field();
  EXPECT_EQ(broadcast_unsafe(T, kTh), unsafe_region(T, kTh));
  EXPECT_FALSE(broadcast_unsafe(T, kTh).empty());
}

}  // namespace
}  // namespace wildfire
