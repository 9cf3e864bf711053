#include "wildfire/local_knowledge.hpp"

#include <algorithm>
#include <stdexcept>

namespace wildfire {

bool NeighborGraph::connected(int i, int j) const {
  const auto& row = adjacency.at(static_cast<std::size_t>(i));
  return std::binary_search(row.begin(), row.end(), j);
}

NeighborGraph neighbor_graph(std::span<const Vec2> positions, double d) {
  if (!(d >= 0.0)) throw std::invalid_argument("neighbor_graph: radius must be non-negative");
  NeighborGraph g;
  g.radius = d;
  g.adjacency.resize(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (std::size_t j = i + 1; j < positions.size(); ++j)
      if (distance(positions[i], positions[j]) <= d) {
        g.adjacency[i].push_back(static_cast<int>(j));
        g.adjacency[j].push_back(static_cast<int>(i));
      }
  for (auto& row : g.adjacency) std::sort(row.begin(), row.end());
  return g;
}

LocalMap::LocalMap(const GridSpec& grid, double T_a)
    : T_est(grid, T_a), certainty(grid.size(), 0.0), provenance(grid.size(), Provenance::kOwn) {}

LocalMap sense(LocalMap map, const ScalarField& true_T, Vec2 x, double d) {
  const GridSpec& grid = true_T.spec();
  require_same_grid(grid, map.T_est.spec(), "sense");
  const double d2 = d * d;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const Vec2 r = grid.center(i, j) - x;
      if (dot(r, r) > d2) continue;
      const std::size_t k = grid.index(i, j);
      map.T_est[k] = true_T[k];
      map.certainty[k] = 1.0;
      map.provenance[k] = Provenance::kOwn;
    }
  return map;
}

LocalMap decay(LocalMap map, double dt, double lambda_decay, double T_a) {
  if (!(lambda_decay >= 0.0)) throw std::invalid_argument("decay: rate must be non-negative");
  if (lambda_decay == 0.0) return map;
  for (std::size_t k = 0; k < map.certainty.size(); ++k) {
    double& c = map.certainty[k];
    c = std::max(0.0, c - lambda_decay * dt);
    if (c == 0.0) map.T_est[k] = T_a;
  }
  return map;
}

std::vector<LocalMap> share_one_hop(const std::vector<LocalMap>& maps, const NeighborGraph& graph) {
  if (graph.size() != maps.size()) throw std::invalid_argument("share_one_hop: graph and map counts differ");
  std::vector<LocalMap> out = maps;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    LocalMap& mine = out[i];
    for (int j : graph.adjacency[i]) {
      const LocalMap& theirs = maps[static_cast<std::size_t>(j)];
      for (std::size_t k = 0; k < theirs.certainty.size(); ++k) {
        if (theirs.provenance[k] != Provenance::kOwn) continue;
        if (theirs.certainty[k] <= mine.certainty[k]) continue;
        mine.T_est[k] = theirs.T_est[k];
        mine.certainty[k] = theirs.certainty[k];
        mine.provenance[k] = Provenance::kReceived;
      }
    }
  }
  return out;
}

CellMask broadcast_unsafe(const ScalarField& true_T, const RegionThresholds& th) { return unsafe_region(true_T, th); }

}  // namespace wildfire
