#pragma once

// Two-layer frontier partition. Frontier cells are grouped by 2D K-means into
// at most three broad-view directions (BVFs); each BVF is split again by
// K-means on bearing unit vectors into at most three close-up-view directions
// (CVFs). Every direction is anchored to the frontier cell whose bearing from
// the agent is angularly closest, and rendered into a text snapshot.

#include <cstdio>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "reexplore/core.hpp"
#include "reexplore/gridworld.hpp"
#include "reexplore/occupancy.hpp"

namespace reexplore {

struct Vec2 {
  double x{0.0};
  double y{0.0};

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double squared_distance(const Vec2& a, const Vec2& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

struct KMeansResult {
  std::vector<int> assignment;  // cluster index per point
  std::vector<Vec2> centroids;
  int iterations{0};

  std::vector<std::size_t> cluster_sizes() const {
    std::vector<std::size_t> sizes(centroids.size(), 0);
    for (int a : assignment) ++sizes[std::size_t(a)];
    return sizes;
  }
};

/// Lloyd's algorithm. The first centre is a seeded random point; each further
/// centre is the point farthest from the centres chosen so far (lowest index on
/// ties). Stops once assignments are stable or after `max_iterations`.
/// Nearest-centroid ties go to the lower cluster index; an emptied cluster
/// keeps its previous centroid.
inline KMeansResult kmeans_points(const std::vector<Vec2>& points, int k, std::uint64_t seed,
                                  int max_iterations = 100) {
  if (k < 1 || std::size_t(k) > points.size())
    throw Error(ErrorCode::kInvalidArgument, "kmeans requires 1 <= k <= number of points");
  const std::size_t n = points.size();
  Rng rng(seed);

  KMeansResult r;
  r.centroids.push_back(points[rng.below(n)]);
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = squared_distance(points[i], r.centroids[0]);
  while (r.centroids.size() < std::size_t(k)) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (nearest[i] > nearest[best]) best = i;
    r.centroids.push_back(points[best]);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], squared_distance(points[i], points[best]));
  }

  r.assignment.assign(n, -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(points[i], r.centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(points[i], r.centroids[std::size_t(c)]);
        if (d < best_d) best = c, best_d = d;
      }
      if (r.assignment[i] != best) r.assignment[i] = best, changed = true;
    }
    r.iterations = iter + 1;
    if (!changed) break;

    std::vector<Vec2> sum(static_cast<std::size_t>(k));
    std::vector<std::size_t> cnt(std::size_t(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sum[std::size_t(r.assignment[i])];
      s.x += points[i].x, s.y += points[i].y;
      ++cnt[std::size_t(r.assignment[i])];
    }
    for (std::size_t c = 0; c < std::size_t(k); ++c)
      if (cnt[c] > 0) r.centroids[c] = {sum[c].x / double(cnt[c]), sum[c].y / double(cnt[c])};
  }
  return r;
}

/// atan2 of the mean sine and cosine, wrapped to (-pi, pi].
inline double circular_mean(const std::vector<double>& angles) {
  if (angles.empty()) throw Error(ErrorCode::kInvalidArgument, "circular mean of no angles");
  double s = 0.0, c = 0.0;
  for (double a : angles) s += std::sin(a), c += std::cos(a);
  s /= double(angles.size());
  c /= double(angles.size());
  if (std::hypot(s, c) < 1e-9) throw Error(ErrorCode::kZeroResultant, "angles cancel on the unit circle");
  return wrap_angle(std::atan2(s, c));
}

/// Frontier cell whose bearing from the agent is closest to theta. Ties go to
/// the cell nearer the agent, then to row-major order.
inline Cell representative_cell(const std::vector<Cell>& frontiers, const Cell& agent, double theta) {
  if (frontiers.empty()) throw Error(ErrorCode::kEmptyFrontierSet, "no frontier cells to anchor");
  const Cell* best = nullptr;
  double best_ang = 0.0, best_dist = 0.0;
  for (const Cell& c : frontiers) {
    const double ang = angular_distance(bearing(agent, c), theta);
    const double dist = euclidean(agent, c);
    bool better = false;
    if (!best || ang < best_ang - 1e-12) {
      better = true;
    } else if (std::abs(ang - best_ang) <= 1e-12) {
      if (dist < best_dist - 1e-12) better = true;
      else if (std::abs(dist - best_dist) <= 1e-12 && cell_less(c, *best)) better = true;
    }
    if (better) best = &c, best_ang = ang, best_dist = dist;
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Snapshots

/// Text stand-in for the RGB frontier view: the cone seen from the agent when
/// facing `theta`, its labels, and a deterministic ASCII rendering.
struct Snapshot {
  double theta{0.0};
  Observation raster;
  std::vector<std::string> visible_labels;  // sorted multiset
  std::string text_render;
};

inline std::string format_degrees(double radians) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0f", deg(radians));
  return std::string(buf) == "-0" ? "0" : buf;
}

inline Snapshot render_snapshot(const GridMap& map, const OccupancyMap& occ, const Cell& agent, double theta,
                                const SensingParams& sensing) {
  Snapshot s;
  s.theta = theta;
  s.raster = cast_rays(map, AgentPose{agent, wrap_angle(theta)}, sensing);

  int free_cells = 0, walls = 0, novel = 0, depth = 0;
  int x0 = agent.x, x1 = agent.x, y0 = agent.y, y1 = agent.y;
  for (const auto& v : s.raster.visible) {
    if (v.label) s.visible_labels.push_back(*v.label);
    (v.content == CellContent::kFree ? free_cells : walls) += 1;
    if (!occ.seen.test(v.cell)) ++novel;
    depth = std::max(depth, chebyshev(agent, v.cell));
    x0 = std::min(x0, v.cell.x), x1 = std::max(x1, v.cell.x);
    y0 = std::min(y0, v.cell.y), y1 = std::max(y1, v.cell.y);
  }
  std::sort(s.visible_labels.begin(), s.visible_labels.end());

  std::vector<std::string> rows(std::size_t(y1 - y0 + 1), std::string(std::size_t(x1 - x0 + 1), ' '));
  for (const auto& v : s.raster.visible) {
    char ch = v.content == CellContent::kWall ? '#' : (v.label ? '*' : '.');
    rows[std::size_t(v.cell.y - y0)][std::size_t(v.cell.x - x0)] = ch;
  }
  rows[std::size_t(agent.y - y0)][std::size_t(agent.x - x0)] = '@';

  std::ostringstream os;
  os << "view heading=" << format_degrees(theta) << "deg depth=" << depth << " free=" << free_cells
     << " wall=" << walls << " novel=" << novel << '\n';
  os << "labels:";
  if (s.visible_labels.empty()) os << " none";
  for (std::size_t i = 0; i < s.visible_labels.size(); ++i) os << (i ? ", " : " ") << s.visible_labels[i];
  os << '\n';
  for (auto& r : rows) {
    r.erase(r.find_last_not_of(' ') + 1);
    os << r << '\n';
  }
  s.text_render = os.str();
  return s;
}

// ---------------------------------------------------------------------------
// Hierarchy

struct Cvf {
  int bvf{0};
  int index{0};
  double theta{0.0};
  std::vector<Cell> members;
  Cell anchor;
  std::optional<Snapshot> view;
};

struct Bvf {
  int index{0};
  double theta{0.0};
  std::vector<Cell> members;
  std::vector<Cvf> children;
  Cell anchor;
  bool fallback{false};
  std::optional<Snapshot> view;
};

struct HierarchyParams {
  std::uint64_t seed{0};
  std::size_t min_bvf_size{3};
  std::size_t min_cvf_size{2};
};

struct FrontierHierarchy {
  std::vector<Bvf> bvfs;
  Cell agent;
  std::vector<Cell> frontiers;

  bool empty() const { return bvfs.empty(); }
};

namespace detail {

inline std::vector<double> bearings(const Cell& agent, const std::vector<Cell>& cells) {
  std::vector<double> out;
  out.reserve(cells.size());
  for (const Cell& c : cells) out.push_back(c == agent ? 0.0 : bearing(agent, c));
  return out;
}

inline double direction_or(const std::vector<double>& angles, double fallback) {
  try {
    return circular_mean(angles);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kZeroResultant) throw;
    return fallback;
  }
}

}  // namespace detail

/// Broad-view directions, without children. Clusters smaller than
/// `min_size` are dropped; if none survive, k uniform angular bins centred on
/// `heading` take their place.
inline std::vector<Bvf> build_bvf(const std::vector<Cell>& frontiers, const Cell& agent, std::uint64_t seed,
                                  std::size_t min_size = 3, double heading = 0.0) {
  std::vector<Bvf> out;
  if (frontiers.empty()) return out;
  const int k = int(std::min<std::size_t>(3, frontiers.size()));

  std::vector<Vec2> pts;
  for (const Cell& c : frontiers) pts.push_back({double(c.x), double(c.y)});
  const KMeansResult km = kmeans_points(pts, k, seed);

  for (int c = 0; c < k; ++c) {
    Bvf b;
    for (std::size_t i = 0; i < frontiers.size(); ++i)
      if (km.assignment[i] == c) b.members.push_back(frontiers[i]);
    if (b.members.size() < min_size || b.members.empty()) continue;
    const Vec2& centroid = km.centroids[std::size_t(c)];
    const double centroid_bearing =
        std::atan2(centroid.y - agent.y, centroid.x - agent.x);
    b.theta = detail::direction_or(detail::bearings(agent, b.members), wrap_angle(centroid_bearing));
    b.index = int(out.size());
    out.push_back(std::move(b));
  }
  if (!out.empty()) return out;

  std::vector<Bvf> bins(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) bins[std::size_t(i)].theta = wrap_angle(heading + kTwoPi * i / k);
  for (const Cell& c : frontiers) {
    const double a = c == agent ? 0.0 : bearing(agent, c);
    std::size_t best = 0;
    for (std::size_t i = 1; i < bins.size(); ++i)
      if (angular_distance(a, bins[i].theta) < angular_distance(a, bins[best].theta) - 1e-12) best = i;
    bins[best].members.push_back(c);
  }
  for (auto& b : bins) {
    if (b.members.empty()) continue;
    b.fallback = true;
    b.index = int(out.size());
    out.push_back(std::move(b));
  }
  return out;
}

/// Close-up directions inside one BVF.
inline std::vector<Cvf> build_cvf(const Bvf& bvf, const Cell& agent, std::uint64_t seed, std::size_t min_size = 2) {
  if (bvf.members.empty()) throw Error(ErrorCode::kInvalidArgument, "BVF has no members");
  auto single = [&] {
    Cvf c;
    c.bvf = bvf.index;
    c.theta = bvf.theta;
    c.members = bvf.members;
    return std::vector<Cvf>{c};
  };
  if (bvf.members.size() < 3) return single();

  const auto angles = detail::bearings(agent, bvf.members);
  std::vector<Vec2> emb;
  for (double a : angles) emb.push_back({std::cos(a), std::sin(a)});
  const int k = int(std::min<std::size_t>(3, bvf.members.size()));
  const KMeansResult km = kmeans_points(emb, k, seed);

  std::vector<Cvf> out;
  for (int c = 0; c < k; ++c) {
    Cvf cvf;
    cvf.bvf = bvf.index;
    std::vector<double> sub;
    for (std::size_t i = 0; i < bvf.members.size(); ++i)
      if (km.assignment[i] == c) cvf.members.push_back(bvf.members[i]), sub.push_back(angles[i]);
    if (cvf.members.size() < min_size || cvf.members.empty()) continue;
    cvf.theta = detail::direction_or(sub, bvf.theta);
    cvf.index = int(out.size());
    out.push_back(std::move(cvf));
  }
  if (out.empty()) return single();
  return out;
}

inline FrontierHierarchy build_hierarchy(const std::vector<Cell>& frontiers, const AgentPose& agent,
                                         const HierarchyParams& params = {}) {
  FrontierHierarchy h;
  h.agent = agent.cell;
  h.frontiers = frontiers;
  h.bvfs = build_bvf(frontiers, agent.cell, params.seed, params.min_bvf_size, agent.heading);
  for (auto& b : h.bvfs) {
    b.anchor = representative_cell(frontiers, agent.cell, b.theta);
    b.children = build_cvf(b, agent.cell, params.seed * 31 + std::uint64_t(b.index) + 1, params.min_cvf_size);
    for (auto& c : b.children) c.anchor = representative_cell(frontiers, agent.cell, c.theta);
  }
  return h;
}

inline std::vector<Cell> frontier_cells(const std::vector<FrontierCell>& f) {
  std::vector<Cell> out;
  out.reserve(f.size());
  for (const auto& c : f) out.push_back(c.cell);
  return out;
}

/// Camera direction for a node: towards its anchor cell.
inline double view_heading(const Cell& agent, const Cell& anchor, double theta) {
  return anchor == agent ? theta : bearing(agent, anchor);
}

/// Render the view of every BVF and CVF.
inline void attach_views(FrontierHierarchy& h, const GridMap& map, const OccupancyMap& occ,
                         const SensingParams& sensing) {
  for (auto& b : h.bvfs) {
    b.view = render_snapshot(map, occ, h.agent, view_heading(h.agent, b.anchor, b.theta), sensing);
    for (auto& c : b.children)
      c.view = render_snapshot(map, occ, h.agent, view_heading(h.agent, c.anchor, c.theta), sensing);
  }
}

inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return std::string(buf) == "-0.00" ? "0.00" : buf;
}

/// One line per node: "BVF b theta_deg size" and "CVF b j theta_deg size x y".
inline std::string dump_hierarchy(const FrontierHierarchy& h) {
  std::ostringstream os;
  for (const auto& b : h.bvfs) {
    os << "BVF " << b.index << ' ' << fixed2(deg(b.theta)) << ' ' << b.members.size() << '\n';
    for (const auto& c : b.children)
      os << "CVF " << c.bvf << ' ' << c.index << ' ' << fixed2(deg(c.theta)) << ' ' << c.members.size() << ' '
         << c.anchor.x << ' ' << c.anchor.y << '\n';
  }
  return os.str();
}

}  // namespace reexplore
