#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wildfire/fire_model.hpp"
#include "wildfire/grid_field.hpp"

namespace wildfire {

/// Delta-disk communication graph; adjacency lists are sorted.
struct NeighborGraph {
  double radius = 0.0;
  std::vector<std::vector<int>> adjacency;

  bool connected(int i, int j) const;
  std::size_t size() const { return adjacency.size(); }
};

NeighborGraph neighbor_graph(std::span<const Vec2> positions, double d);

enum class Provenance : std::uint8_t { kOwn, kReceived };

/// One robot's temperature knowledge. Cells with certainty 0 read T_a.
struct LocalMap {
  ScalarField T_est;
  std::vector<double> certainty;
  std::vector<Provenance> provenance;

  LocalMap() = default;
  LocalMap(const GridSpec& grid, double T_a);
};

/// Cells within d of x get the true temperature at certainty 1.
LocalMap sense(LocalMap map, const ScalarField& true_T, Vec2 x, double d);

/// Linear certainty decay; cells reaching zero are reset to T_a.
LocalMap decay(LocalMap map, double dt, double lambda_decay, double T_a);

/// Synchronous one-hop exchange. Robot i takes, from each neighbour, only
/// the cells that neighbour sensed itself, and only where the neighbour is
/// strictly more certain. Taken cells become `received`.
std::vector<LocalMap> share_one_hop(const std::vector<LocalMap>& maps, const NeighborGraph& graph);

/// The unsafe region of the true field; every robot receives this mask.
CellMask broadcast_unsafe(const ScalarField& true_T, const RegionThresholds& th);

}  // namespace wildfire
