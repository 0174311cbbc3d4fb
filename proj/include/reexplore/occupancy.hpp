#pragma once

// Seen / free / occupied layers, the reachable island, and frontier bands.

#include <sstream>
#include <string>
#include <vector>

#include "reexplore/core.hpp"
#include "reexplore/gridworld.hpp"

namespace reexplore {

struct OccupancyMap {
  CellMask seen;
  CellMask free;
  CellMask occupied;

  OccupancyMap() = default;
  OccupancyMap(int width, int height) : seen(width, height), free(width, height), occupied(width, height) {}

  int width() const { return seen.width(); }
  int height() const { return seen.height(); }

  /// Mark visible free cells free and visible walls occupied; every visible
  /// cell becomes seen. Repeating an observation is a no-op.
  void integrate(const Observation& obs) {
    for (const auto& v : obs.visible)
      if (!seen.in_bounds(v.cell)) throw Error(ErrorCode::kShapeMismatch, "observation cell outside occupancy map");
    for (const auto& v : obs.visible) {
      seen.set(v.cell);
      if (v.content == CellContent::kFree) {
        free.set(v.cell);
        occupied.set(v.cell, false);
      } else {
        occupied.set(v.cell);
        free.set(v.cell, false);
      }
    }
  }

  friend bool operator==(const OccupancyMap&, const OccupancyMap&) = default;
};

inline OccupancyMap integrate_observation(OccupancyMap occ, const Observation& obs) {
  occ.integrate(obs);
  return occ;
}

/// 4-connected component of free cells containing the agent.
inline CellMask reachable_island(const OccupancyMap& occ, const Cell& agent) {
  if (!occ.free.test(agent)) throw Error(ErrorCode::kAgentNotFree, "agent cell is not known free");
  const auto dist = bfs_distances(occ.free, {agent});
  CellMask island(occ.width(), occ.height());
  for (int y = 0; y < occ.height(); ++y)
    for (int x = 0; x < occ.width(); ++x)
      if (dist[std::size_t(y) * occ.width() + x] >= 0) island.set({x, y});
  return island;
}

/// Unexplored count over the 3x3 neighbourhood (centre included, clipped at
/// the border).
inline int frontier_score(const OccupancyMap& occ, const Cell& c) {
  int s = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const Cell n{c.x + dx, c.y + dy};
      if (occ.seen.in_bounds(n) && !occ.seen.test(n)) ++s;
    }
  return s;
}

struct FrontierCell {
  Cell cell;
  int score{0};

  friend bool operator==(const FrontierCell&, const FrontierCell&) = default;
};

/// Inclusive score window for a frontier band.
struct FrontierBand {
  int min{2};
  int max{8};
};

/// Island cells whose unexplored-neighbour count lies in the band. Scores come
/// from a summed-area table over the unexplored layer (a 3x3 box filter).
inline std::vector<FrontierCell> extract_frontiers(const OccupancyMap& occ, const Cell& agent, FrontierBand band = {}) {
  if (band.min < 1 || band.min > band.max || band.max > 9)
    throw Error(ErrorCode::kInvalidArgument, "frontier band must satisfy 1 <= min <= max <= 9");
  const CellMask island = reachable_island(occ, agent);
  const int w = occ.width(), h = occ.height();

  // sat[(y+1)*(w+1) + (x+1)] = unexplored count in [0..x] x [0..y]
  std::vector<int> sat(std::size_t(w + 1) * (h + 1), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      sat[std::size_t(y + 1) * (w + 1) + x + 1] = (occ.seen.test({x, y}) ? 0 : 1) +
                                                  sat[std::size_t(y) * (w + 1) + x + 1] +
                                                  sat[std::size_t(y + 1) * (w + 1) + x] -
                                                  sat[std::size_t(y) * (w + 1) + x];
  auto box = [&](int x0, int y0, int x1, int y1) {
    x0 = std::max(x0, 0), y0 = std::max(y0, 0), x1 = std::min(x1, w - 1), y1 = std::min(y1, h - 1);
    return sat[std::size_t(y1 + 1) * (w + 1) + x1 + 1] - sat[std::size_t(y0) * (w + 1) + x1 + 1] -
           sat[std::size_t(y1 + 1) * (w + 1) + x0] + sat[std::size_t(y0) * (w + 1) + x0];
  };

  std::vector<FrontierCell> out;
  for (const Cell& c : island.cells()) {
    const int s = box(c.x - 1, c.y - 1, c.x + 1, c.y + 1);
    if (s >= band.min && s <= band.max) out.push_back({c, s});
  }
  return out;
}

/// ASCII dump of one layer: '1' set, '0' clear, with a "P1 W H" header.
inline std::string dump_layer(const CellMask& layer) {
  std::ostringstream os;
  os << "P1\n" << layer.width() << ' ' << layer.height() << '\n';
  for (int y = 0; y < layer.height(); ++y) {
    for (int x = 0; x < layer.width(); ++x) os << (x ? " " : "") << (layer.test({x, y}) ? '1' : '0');
    os << '\n';
  }
  return os.str();
}

}  // namespace reexplore
