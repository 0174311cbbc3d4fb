#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <queue>

#include "reexplore/gridworld.hpp"

using namespace reexplore;

namespace {

GridMap random_map(std::uint64_t seed, int w, int h, double wall_p) {
  Rng rng(seed);
  GridMap m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
      m.set({x, y}, border || rng.unit() < wall_p ? CellContent::kWall : CellContent::kFree);
    }
  return m;
}

// Plain BFS written independently of the library.
int bfs_len(const GridMap& m, Cell a, Cell b) {
  std::vector<int> d(std::size_t(m.width() * m.height()), -1);
  std::queue<Cell> q;
  d[std::size_t(a.y * m.width() + a.x)] = 0;
  q.push(a);
  while (!q.empty()) {
    Cell c = q.front();
    q.pop();
    if (c == b) return d[std::size_t(c.y * m.width() + c.x)];
    const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
    for (int i = 0; i < 4; ++i) {
      Cell n{c.x + dx[i], c.y + dy[i]};
      if (!m.is_free(n) || d[std::size_t(n.y * m.width() + n.x)] >= 0) continue;
      d[std::size_t(n.y * m.width() + n.x)] = d[std::size_t(c.y * m.width() + c.x)] + 1;
      q.push(n);
    }
  }
  return -1;
}

// Geometric oracle. In doubled coordinates cell (x, y) is the open square
// (2x-1, 2x+1) x (2y-1, 2y+1); the segment joins the two cell centres.
bool crosses_interior(Cell a, Cell b, Cell c) {
  double lo = 0.0, hi = 1.0;
  const double ax = 2 * a.x, ay = 2 * a.y, dx = 2.0 * (b.x - a.x), dy = 2.0 * (b.y - a.y);
  auto clip = [&](double p, double d, double centre) {
    if (d == 0) return std::abs(p - centre) < 1.0;
    double t0 = (centre - 1 - p) / d, t1 = (centre + 1 - p) / d;
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
    return true;
  };
  if (!clip(ax, dx, 2 * c.x) || !clip(ay, dy, 2 * c.y)) return false;
  return lo < hi;
}

bool oracle_visible(const GridMap& m, Cell a, Cell b) {
  const int x0 = std::min(a.x, b.x), x1 = std::max(a.x, b.x), y0 = std::min(a.y, b.y), y1 = std::max(a.y, b.y);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const Cell c{x, y};
      if (c == a || c == b) continue;
      if (m.is_wall(c) && crosses_interior(a, b, c)) return false;
    }
  // Lattice corners hit exactly by the segment: blocked when both cells that
  // only touch the segment at that corner are walls.
  const int ex = b.x - a.x, ey = b.y - a.y;
  const int g = std::gcd(std::abs(ex), std::abs(ey));
  if (g == 0) return true;
  const int sx = ex > 0 ? 1 : -1, sy = ey > 0 ? 1 : -1;
  for (int k = 1; k < 2 * g; ++k) {
    const int px = 2 * a.x + k * ex / g, py = 2 * a.y + k * ey / g;
    if (px % 2 == 0 || py % 2 == 0) continue;
    const Cell side1{(px + sx) / 2, (py - sy) / 2}, side2{(px - sx) / 2, (py + sy) / 2};
    if (m.is_wall(side1) && m.is_wall(side2)) return false;
  }
  return true;
}

}  // namespace

TEST(LoadMap, PadsOpenBorder) {
  const GridMap m = load_map("3 3\n...\n...\n...\n");
  EXPECT_EQ(m.width(), 5);
  EXPECT_EQ(m.height(), 5);
  for (int i = 0; i < 5; ++i) {
    EXPECT_TRUE(m.is_wall({i, 0}));
    EXPECT_TRUE(m.is_wall({0, i}));
    EXPECT_TRUE(m.is_wall({4, i}));
    EXPECT_TRUE(m.is_wall({i, 4}));
  }
  EXPECT_EQ(m.free_mask().count(), 9u);
}

TEST(LoadMap, ClosedMapIsNotPadded) {
  const GridMap m = load_map("4 3 0.25\n####\n#..#\n####\n");
  EXPECT_EQ(m.width(), 4);
  EXPECT_EQ(m.height(), 3);
  EXPECT_DOUBLE_EQ(m.cell_size_m(), 0.25);
}

TEST(LoadMap, NonRectangular) {
  try {
    load_map("5 2\n####\n#####\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonRectangular);
  }
}

TEST(LoadMap, LabelOnFreeCell) {
  const GridMap m = load_map("5 5 0.1\n#####\n#...#\n#...#\n#...#\n#####\nlabel 1 1 sofa\n");
  ASSERT_NE(m.label({1, 1}), nullptr);
  EXPECT_EQ(*m.label({1, 1}), "sofa");
  EXPECT_EQ(m.labels().size(), 1u);
}

TEST(LoadMap, LabelTextKeepsSpacesAndUtf8) {
  const GridMap m = load_map("3 3\n###\n#.#\n###\nlabel 1 1 café table\n");
  EXPECT_EQ(*m.label({1, 1}), "café table");
}

TEST(LoadMap, Errors) {
  auto code = [](const std::string& doc) {
    try {
      load_map(doc);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kConfig;  // sentinel: no error
  };
  EXPECT_EQ(code("3 3\n###\n#.#\n###\nlabel 0 0 lamp\n"), ErrorCode::kLabelOnWall);
  EXPECT_EQ(code(""), ErrorCode::kEmptyMap);
  EXPECT_EQ(code("\n  \n"), ErrorCode::kEmptyMap);
  EXPECT_EQ(code("0 3\n"), ErrorCode::kEmptyMap);
  EXPECT_EQ(code("3 3\n###\n#x#\n###\n"), ErrorCode::kUnknownCharacter);
  EXPECT_EQ(code("3 3\n###\n#.#\n"), ErrorCode::kParse);
  EXPECT_EQ(code("3 3\n###\n#.#\n###\nlabel 9 9 lamp\n"), ErrorCode::kOutOfBounds);
  EXPECT_EQ(code("3 3\n###\n#.#\n###\nsticker 1 1 lamp\n"), ErrorCode::kParse);
}

TEST(LoadMap, FormatRoundTrip) {
  GridMap m = random_map(3, 9, 7, 0.3);
  m.set({1, 1}, CellContent::kFree);
  m.set_label({1, 1}, "mug");
  const GridMap back = load_map(format_map(m));
  EXPECT_EQ(back, m);
  EXPECT_EQ(format_map(back), format_map(m));
}

TEST(CastRays, CorridorForward) {
  // Agent at x=1 facing east; free cells x=1..5, wall at x=6.
  const GridMap m = load_map("9 3\n#########\n#.....###\n#########\n");
  const Observation o = cast_rays(m, {{1, 1}, 0.0}, rad(120), 5);
  std::vector<Cell> row;
  for (const auto& v : o.visible)
    if (v.cell.y == 1) row.push_back(v.cell);
  ASSERT_EQ(row.size(), 6u);
  for (int x = 1; x <= 6; ++x) EXPECT_EQ(row[std::size_t(x - 1)].x, x);
  for (const auto& v : o.visible) {
    if (v.cell.y == 1 && v.cell.x <= 5) {
      EXPECT_EQ(v.content, CellContent::kFree);
    }
    EXPECT_LE(v.cell.x, 6);
  }
}

TEST(CastRays, OpenRoomPanoramic) {
  // 7x7 free room, padded with a wall ring to 9x9.
  const GridMap m = load_map("7 7\n.......\n.......\n.......\n.......\n.......\n.......\n.......\n");
  const Observation o = cast_rays(m, {{4, 4}, 0.3}, kTwoPi, 7);
  std::size_t free_seen = 0, walls_seen = 0;
  for (const auto& v : o.visible) (v.content == CellContent::kFree ? free_seen : walls_seen) += 1;
  EXPECT_EQ(free_seen, 49u);
  // Every wall except the four room corners, which hide behind their
  // neighbours.
  EXPECT_EQ(walls_seen, 28u);
}

TEST(CastRays, OcclusionBehindWall) {
  const GridMap m = load_map("9 3\n#########\n#..#....#\n#########\n");
  const Observation o = cast_rays(m, {{1, 1}, 0.0}, rad(120), 8);
  EXPECT_TRUE(o.contains({2, 1}));
  EXPECT_TRUE(o.contains({3, 1}));  // the wall itself is visible
  for (int x = 4; x <= 8; ++x) EXPECT_FALSE(o.contains({x, 1}));
}

TEST(CastRays, DegenerateConeSeesOnlySelfAndRay) {
  const GridMap m = load_map("7 7\n#######\n#.....#\n#.....#\n#.....#\n#.....#\n#.....#\n#######\n");
  const Observation o = cast_rays(m, {{1, 3}, 0.0}, 1e-6, 10);
  for (const auto& v : o.visible) EXPECT_EQ(v.cell.y, 3);
}

TEST(CastRays, RangeIsEuclidean) {
  const GridMap m = load_map("7 7\n#######\n#.....#\n#.....#\n#.....#\n#.....#\n#.....#\n#######\n");
  const Observation o = cast_rays(m, {{1, 1}, 0.0}, kTwoPi, 2);
  EXPECT_TRUE(o.contains({3, 1}));
  EXPECT_FALSE(o.contains({3, 2}));  // sqrt(5) > 2
  for (const auto& v : o.visible) EXPECT_LE(std::hypot(v.cell.x - 1, v.cell.y - 1), 2.0 + 1e-9);
}

TEST(CastRays, MatchesGeometricOracle) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const GridMap m = random_map(seed, 20, 20, 0.25);
    Cell origin{10, 10};
    GridMap mm = m;
    mm.set(origin, CellContent::kFree);
    const double heading = wrap_angle(0.37 * double(seed));
    const Observation o = cast_rays(mm, {origin, heading}, rad(120), 17);
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 20; ++x) {
        const Cell c{x, y};
        const bool in_cone = c == origin || angular_distance(bearing(origin, c), heading) <= rad(60) + 1e-9;
        const bool in_range = std::hypot(x - origin.x, y - origin.y) <= 17.0;
        const bool expect = in_cone && in_range && (c == origin || oracle_visible(mm, origin, c));
        ASSERT_EQ(o.contains(c), expect) << "seed " << seed << " cell " << x << "," << y;
      }
  }
}

TEST(CastRays, Deterministic) {
  const GridMap m = random_map(5, 20, 20, 0.2);
  GridMap mm = m;
  mm.set({4, 4}, CellContent::kFree);
  EXPECT_EQ(cast_rays(mm, {{4, 4}, 0.5}, rad(120), 17), cast_rays(mm, {{4, 4}, 0.5}, rad(120), 17));
}

TEST(CastRays, LabelsReported) {
  const GridMap m = load_map("7 3\n#######\n#.....#\n#######\nlabel 4 1 sofa\n");
  const Observation o = cast_rays(m, {{1, 1}, 0.0}, rad(120), 17);
  bool found = false;
  for (const auto& v : o.visible)
    if (v.label) found = found || (*v.label == "sofa" && v.cell == Cell{4, 1});
  EXPECT_TRUE(found);
}

TEST(PlanPath, SameCell) {
  const GridMap m = load_map("3 3\n###\n#.#\n###\n");
  EXPECT_EQ(plan_path(m.free_mask(), {1, 1}, {1, 1}).length(), 0);
}

TEST(PlanPath, StraightCorridor) {
  const GridMap m = load_map("8 3\n########\n#......#\n########\n");
  const Path p = plan_path(m.free_mask(), {1, 1}, {6, 1});
  EXPECT_EQ(p.length(), 5);
  EXPECT_EQ(p.cells.size(), 6u);
}

TEST(PlanPath, SealedGoal) {
  const GridMap m = load_map("7 3\n#######\n#..#..#\n#######\n");
  try {
    plan_path(m.free_mask(), {1, 1}, {5, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnreachable);
  }
}

TEST(PlanPath, TieBreakPrefersSmallerYX) {
  // Open 2x2 block: from (1,1) to (2,2) both orders are shortest; the path
  // goes through (2,1), which is smaller than (1,2) in (y, x) order.
  const GridMap m = load_map("4 4\n####\n#..#\n#..#\n####\n");
  const Path p = plan_path(m.free_mask(), {1, 1}, {2, 2});
  ASSERT_EQ(p.cells.size(), 3u);
  EXPECT_EQ(p.cells[1], (Cell{2, 1}));
}

TEST(PlanPath, OptimalAgainstBfsOracle) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const GridMap m = random_map(seed + 1000, 20, 20, 0.3);
    Rng rng(seed);
    const auto free = m.free_mask().cells();
    if (free.size() < 2) continue;
    for (int trial = 0; trial < 5; ++trial) {
      const Cell a = free[rng.below(free.size())], b = free[rng.below(free.size())];
      const int expect = bfs_len(m, a, b);
      if (expect < 0) {
        EXPECT_THROW(plan_path(m.free_mask(), a, b), Error);
        continue;
      }
      const Path p = plan_path(m.free_mask(), a, b);
      ASSERT_EQ(p.length(), expect);
      EXPECT_EQ(p.cells.front(), a);
      EXPECT_EQ(p.cells.back(), b);
      for (std::size_t i = 1; i < p.cells.size(); ++i) {
        EXPECT_EQ(manhattan(p.cells[i - 1], p.cells[i]), 1);
        EXPECT_TRUE(m.is_free(p.cells[i]));
      }
    }
  }
}

TEST(StepTo, AdjacentTarget) {
  const GridMap m = load_map("5 3\n#####\n#...#\n#####\n");
  const StepOutcome s = step_to(m, m.free_mask(), {{1, 1}, 0.0}, {2, 1}, SensingParams{});
  EXPECT_EQ(s.steps, 1);
  EXPECT_EQ(s.observations.size(), 1u);
  EXPECT_EQ(s.pose.cell, (Cell{2, 1}));
  EXPECT_FALSE(s.replan);
}

TEST(StepTo, SameCellObservesOnce) {
  const GridMap m = load_map("5 3\n#####\n#...#\n#####\n");
  const StepOutcome s = step_to(m, m.free_mask(), {{2, 1}, 0.0}, {2, 1}, SensingParams{});
  EXPECT_EQ(s.steps, 0);
  EXPECT_EQ(s.observations.size(), 1u);
}

TEST(StepTo, BlockedMidwayReplans) {
  const GridMap truth = load_map("7 3\n#######\n#..#..#\n#######\n");
  CellMask believed = truth.free_mask();
  believed.set({3, 1});  // the agent wrongly believes the wall is free
  const StepOutcome s = step_to(truth, believed, {{1, 1}, 0.0}, {5, 1}, SensingParams{});
  EXPECT_TRUE(s.replan);
  EXPECT_EQ(s.pose.cell, (Cell{2, 1}));
  EXPECT_EQ(s.steps, 1);
}

TEST(StepTo, UnreachablePropagates) {
  const GridMap m = load_map("7 3\n#######\n#..#..#\n#######\n");
  EXPECT_THROW(step_to(m, m.free_mask(), {{1, 1}, 0.0}, {5, 1}, SensingParams{}), Error);
}

TEST(Proximity, SeesNeighbourhoodThroughCorners) {
  const GridMap m = load_map("5 5\n#####\n#.#.#\n##.##\n#.#.#\n#####\n");
  const Observation o = proximity_observation(m, {{2, 2}, 0.0});
  EXPECT_EQ(o.visible.size(), 9u);
  EXPECT_TRUE(o.contains({1, 1}));
}
