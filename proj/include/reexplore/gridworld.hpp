#pragma once

// Deterministic 2D grid environment: map documents, cone-of-view line-of-sight
// sensing, 4-connected shortest paths and plan-following motion.

#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "reexplore/core.hpp"

namespace reexplore {

enum class CellContent : std::uint8_t { kFree, kWall };

class GridMap {
 public:
  GridMap() = default;
  GridMap(int width, int height, double cell_size_m = 0.1)
      : width_(width), height_(height), cell_size_m_(cell_size_m),
        cells_(std::size_t(width) * height, CellContent::kFree) {
    if (width < 1 || height < 1) throw Error(ErrorCode::kEmptyMap, "map must be at least 1x1");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double cell_size_m() const { return cell_size_m_; }

  bool in_bounds(const Cell& c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }

  CellContent at(const Cell& c) const {
    if (!in_bounds(c)) return CellContent::kWall;
    return cells_[std::size_t(c.y) * width_ + c.x];
  }
  bool is_wall(const Cell& c) const { return at(c) == CellContent::kWall; }
  bool is_free(const Cell& c) const { return at(c) == CellContent::kFree; }

  void set(const Cell& c, CellContent v) {
    if (!in_bounds(c)) throw Error(ErrorCode::kOutOfBounds, "set outside map");
    cells_[std::size_t(c.y) * width_ + c.x] = v;
    if (v == CellContent::kWall) labels_.erase(c);
  }

  void set_label(const Cell& c, std::string text) {
    if (!in_bounds(c)) throw Error(ErrorCode::kOutOfBounds, "label outside map");
    if (is_wall(c)) throw Error(ErrorCode::kLabelOnWall, "label on wall cell");
    labels_[c] = std::move(text);
  }

  const std::string* label(const Cell& c) const {
    auto it = labels_.find(c);
    return it == labels_.end() ? nullptr : &it->second;
  }

  const std::map<Cell, std::string, CellOrder>& labels() const { return labels_; }

  std::vector<Cell> cells_labeled(std::string_view text) const {
    std::vector<Cell> out;
    for (const auto& [c, l] : labels_)
      if (l == text) out.push_back(c);
    return out;
  }

  CellMask free_mask() const {
    CellMask m(width_, height_);
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x)
        if (is_free({x, y})) m.set({x, y});
    return m;
  }

  friend bool operator==(const GridMap&, const GridMap&) = default;

 private:
  int width_{0};
  int height_{0};
  double cell_size_m_{0.1};
  std::vector<CellContent> cells_;
  std::map<Cell, std::string, CellOrder> labels_;
};

struct AgentPose {
  Cell cell;
  double heading{0.0};  // radians, (-pi, pi]

  friend bool operator==(const AgentPose&, const AgentPose&) = default;
};

/// Sensor configuration. Only fov and range drive the 2D ray caster; the
/// camera fields are carried through configs and logs unchanged.
struct SensingParams {
  double fov_rad{rad(120.0)};
  int range_cells{17};
  double camera_height_m{1.5};
  double camera_pitch_deg{-30.0};
  int image_width{1280};
  int image_resized_width{360};
};

struct VisibleCell {
  Cell cell;
  CellContent content{CellContent::kFree};
  std::optional<std::string> label;

  friend bool operator==(const VisibleCell&, const VisibleCell&) = default;
};

struct Observation {
  std::vector<VisibleCell> visible;  // row-major order
  AgentPose origin;
  double fov_rad{0.0};
  int range_cells{0};

  bool contains(const Cell& c) const {
    return std::any_of(visible.begin(), visible.end(), [&](const VisibleCell& v) { return v.cell == c; });
  }

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct Path {
  std::vector<Cell> cells;
  int length() const { return cells.empty() ? 0 : int(cells.size()) - 1; }
};

// ---------------------------------------------------------------------------
// Map documents
//
//   W H cell_size_m
//   <H rows of W characters, '.' free, '#' wall>
//   label x y <text>
//
// A document whose outer ring is not entirely wall is padded with a wall
// border; label coordinates are shifted along with the grid.

inline GridMap load_map(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::string cur;
    for (char ch : text) {
      if (ch == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    if (!cur.empty()) lines.push_back(cur);
    for (auto& l : lines)
      if (!l.empty() && l.back() == '\r') l.pop_back();
  }

  std::size_t li = 0;
  while (li < lines.size() && lines[li].find_first_not_of(" \t") == std::string::npos) ++li;
  if (li == lines.size()) throw Error(ErrorCode::kEmptyMap, "empty map document");

  int w = 0, h = 0;
  double cell_size = 0.1;
  {
    std::istringstream hs(lines[li]);
    if (!(hs >> w >> h)) throw Error(ErrorCode::kParse, "bad header line: " + lines[li]);
    if (!(hs >> cell_size)) cell_size = 0.1;
    if (w < 1 || h < 1) throw Error(ErrorCode::kEmptyMap, "map dimensions must be positive");
    if (!(cell_size > 0.0)) throw Error(ErrorCode::kParse, "cell size must be positive");
  }
  ++li;

  std::vector<std::string> rows;
  for (int r = 0; r < h; ++r, ++li) {
    if (li >= lines.size()) throw Error(ErrorCode::kParse, "expected " + std::to_string(h) + " rows");
    if (int(lines[li].size()) != w)
      throw Error(ErrorCode::kNonRectangular, "row " + std::to_string(r) + " has length " +
                                                  std::to_string(lines[li].size()) + ", expected " +
                                                  std::to_string(w));
    for (char ch : lines[li])
      if (ch != '.' && ch != '#')
        throw Error(ErrorCode::kUnknownCharacter, std::string("unknown map character '") + ch + "'");
    rows.push_back(lines[li]);
  }

  bool closed = true;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((x == 0 || y == 0 || x == w - 1 || y == h - 1) && rows[y][x] != '#') closed = false;
  const int pad = closed ? 0 : 1;

  GridMap map(w + 2 * pad, h + 2 * pad, cell_size);
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      const int sx = x - pad, sy = y - pad;
      const bool wall = sx < 0 || sy < 0 || sx >= w || sy >= h || rows[sy][sx] == '#';
      map.set({x, y}, wall ? CellContent::kWall : CellContent::kFree);
    }

  for (; li < lines.size(); ++li) {
    const std::string& l = lines[li];
    if (l.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream ls(l);
    std::string kw;
    int x = 0, y = 0;
    if (!(ls >> kw >> x >> y) || kw != "label") throw Error(ErrorCode::kParse, "bad label line: " + l);
    std::string rest;
    std::getline(ls, rest);
    const auto start = rest.find_first_not_of(" \t");
    if (start == std::string::npos) throw Error(ErrorCode::kParse, "label without text: " + l);
    rest = rest.substr(start);
    const Cell c{x + pad, y + pad};
    if (!map.in_bounds(c)) throw Error(ErrorCode::kOutOfBounds, "label outside map: " + l);
    if (map.is_wall(c)) throw Error(ErrorCode::kLabelOnWall, "label on wall cell: " + l);
    if (map.label(c)) throw Error(ErrorCode::kParse, "duplicate label at cell: " + l);
    map.set_label(c, rest);
  }
  return map;
}

inline std::string format_map(const GridMap& map) {
  std::ostringstream os;
  os << map.width() << ' ' << map.height() << ' ' << map.cell_size_m() << '\n';
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) os << (map.is_wall({x, y}) ? '#' : '.');
    os << '\n';
  }
  for (const auto& [c, l] : map.labels()) os << "label " << c.x << ' ' << c.y << ' ' << l << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Sensing

/// Exact grid line of sight between cell centres. Walls strictly between the
/// endpoints block; the target itself may be a wall. A segment passing exactly
/// through a cell corner is blocked only when both cells sharing that corner
/// are walls.
inline bool line_of_sight(const GridMap& map, const Cell& from, const Cell& to) {
  const int nx = std::abs(to.x - from.x), ny = std::abs(to.y - from.y);
  const int sx = to.x > from.x ? 1 : -1, sy = to.y > from.y ? 1 : -1;
  Cell p = from;
  int ix = 0, iy = 0;
  while (ix < nx || iy < ny) {
    if (ix == nx) {
      p.y += sy, ++iy;
    } else if (iy == ny) {
      p.x += sx, ++ix;
    } else {
      const long long decision = (1LL + 2 * ix) * ny - (1LL + 2 * iy) * nx;
      if (decision == 0) {
        const bool sealed = map.is_wall({p.x + sx, p.y}) && map.is_wall({p.x, p.y + sy});
        p.x += sx, p.y += sy, ++ix, ++iy;
        if (sealed) return false;
      } else if (decision < 0) {
        p.x += sx, ++ix;
      } else {
        p.y += sy, ++iy;
      }
    }
    if (p == to) return true;
    if (map.is_wall(p)) return false;
  }
  return true;
}

inline bool in_view_cone(const AgentPose& pose, const Cell& c, double fov_rad) {
  if (c == pose.cell || fov_rad >= kTwoPi - 1e-12) return true;
  return angular_distance(bearing(pose.cell, c), pose.heading) <= fov_rad / 2.0 + 1e-9;
}

inline Observation cast_rays(const GridMap& map, const AgentPose& pose, double fov_rad, int range_cells) {
  Observation obs;
  obs.origin = pose;
  obs.fov_rad = fov_rad;
  obs.range_cells = range_cells;
  const Cell o = pose.cell;
  const double r2 = double(range_cells) * range_cells + 1e-9;
  for (int y = std::max(0, o.y - range_cells); y <= std::min(map.height() - 1, o.y + range_cells); ++y)
    for (int x = std::max(0, o.x - range_cells); x <= std::min(map.width() - 1, o.x + range_cells); ++x) {
      const Cell c{x, y};
      const double dx = x - o.x, dy = y - o.y;
      if (dx * dx + dy * dy > r2) continue;
      if (!in_view_cone(pose, c, fov_rad)) continue;
      if (!(c == o) && !line_of_sight(map, o, c)) continue;
      VisibleCell v{c, map.at(c), std::nullopt};
      if (const auto* l = map.label(c)) v.label = *l;
      obs.visible.push_back(std::move(v));
    }
  return obs;
}

/// The agent's own cell and its eight neighbours, perceived regardless of
/// heading or occlusion.
inline Observation proximity_observation(const GridMap& map, const AgentPose& pose) {
  Observation obs;
  obs.origin = pose;
  obs.fov_rad = kTwoPi;
  obs.range_cells = 1;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const Cell c{pose.cell.x + dx, pose.cell.y + dy};
      if (!map.in_bounds(c)) continue;
      VisibleCell v{c, map.at(c), std::nullopt};
      if (const auto* l = map.label(c)) v.label = *l;
      obs.visible.push_back(std::move(v));
    }
  return obs;
}

inline Observation cast_rays(const GridMap& map, const AgentPose& pose, const SensingParams& p) {
  return cast_rays(map, pose, p.fov_rad, p.range_cells);
}

// ---------------------------------------------------------------------------
// Paths

/// Breadth-first step distances over `passable` from every source; -1 where
/// unreachable.
inline std::vector<int> bfs_distances(const CellMask& passable, const std::vector<Cell>& sources) {
  const int w = passable.width(), h = passable.height();
  std::vector<int> dist(std::size_t(w) * h, -1);
  std::queue<Cell> q;
  for (const Cell& s : sources)
    if (passable.test(s) && dist[std::size_t(s.y) * w + s.x] < 0) {
      dist[std::size_t(s.y) * w + s.x] = 0;
      q.push(s);
    }
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop();
    const int d = dist[std::size_t(c.y) * w + c.x];
    for (const Cell& n : kNeighbors4) {
      const Cell nc{c.x + n.x, c.y + n.y};
      if (!passable.test(nc)) continue;
      int& nd = dist[std::size_t(nc.y) * w + nc.x];
      if (nd < 0) {
        nd = d + 1;
        q.push(nc);
      }
    }
  }
  return dist;
}

/// Minimum-step 4-connected path over `known_free`. Among equally short
/// continuations the successor with the smaller (y, x) is taken.
inline Path plan_path(const CellMask& known_free, const Cell& from, const Cell& to) {
  if (!known_free.test(from)) throw Error(ErrorCode::kInvalidArgument, "path start is not a known free cell");
  if (!known_free.test(to)) throw Error(ErrorCode::kUnreachable, "path goal is not a known free cell");
  const auto dist = bfs_distances(known_free, {to});
  const int w = known_free.width();
  auto d_at = [&](const Cell& c) { return dist[std::size_t(c.y) * w + c.x]; };
  if (d_at(from) < 0) throw Error(ErrorCode::kUnreachable, "goal unreachable over known free cells");

  Path path;
  path.cells.push_back(from);
  Cell cur = from;
  while (!(cur == to)) {
    const int d = d_at(cur);
    for (const Cell& n : kNeighbors4) {
      const Cell nc{cur.x + n.x, cur.y + n.y};
      if (known_free.test(nc) && d_at(nc) == d - 1) {
        cur = nc;
        break;
      }
    }
    path.cells.push_back(cur);
  }
  return path;
}

struct StepOutcome {
  AgentPose pose;
  std::vector<Observation> observations;
  int steps{0};
  bool replan{false};
};

/// Follow the planned path to `target`, sensing in the direction of travel at
/// each cell entered. If the next cell turns out to be a wall the agent stops
/// on the last valid cell and `replan` is set.
inline StepOutcome step_to(const GridMap& map, const CellMask& known_free, const AgentPose& pose,
                           const Cell& target, const SensingParams& sensing) {
  const Path path = plan_path(known_free, pose.cell, target);
  StepOutcome out;
  out.pose = pose;
  if (path.length() == 0) {
    out.observations.push_back(cast_rays(map, pose, sensing));
    return out;
  }
  for (std::size_t i = 1; i < path.cells.size(); ++i) {
    const Cell next = path.cells[i];
    if (map.is_wall(next)) {
      out.replan = true;
      out.pose.heading = bearing(out.pose.cell, next);
      out.observations.push_back(cast_rays(map, out.pose, sensing));
      break;
    }
    out.pose.heading = bearing(out.pose.cell, next);
    out.pose.cell = next;
    ++out.steps;
    out.observations.push_back(cast_rays(map, out.pose, sensing));
  }
  return out;
}

}  // namespace reexplore
