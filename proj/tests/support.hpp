#pragma once

// Random fixtures shared by the unit suites and the acceptance binary.

#include <algorithm>
#include <set>
#include <utility>
#include <string>
#include <vector>

#include "reexplore/reexplore.hpp"

namespace reexplore::fixtures {

inline const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> w = {"kitchen", "sofa",  "hallway", "bedroom", "lamp",    "sink",
                                             "stairs",  "door",  "window",  "table",   "mirror",  "plant",
                                             "café",    "büro",  "кухня",   "台所",    "naïve",   "corridor",
                                             "north",   "south", "east",    "west",    "🪴 pot",  "shelf"};
  return w;
}

inline std::string random_sentence(Rng& rng, int min_words = 3, int max_words = 9, bool ascii_only = false) {
  const auto& pool = word_pool();
  std::string s;
  const int n = rng.between(min_words, max_words);
  for (int i = 0; i < n; ++i) {
    std::string w;
    do w = pool[std::size_t(rng.between(0, int(pool.size()) - 1))];
    while (ascii_only && std::any_of(w.begin(), w.end(), [](char c) { return static_cast<unsigned char>(c) >= 0x80; }));
    if (!s.empty()) s += ' ';
    s += w;
  }
  return s + '.';
}

inline Abstraction random_abstraction(Rng& rng, bool ascii_only = false) {
  Abstraction a;
  for (auto& b : a.reflection_blocks) b = random_sentence(rng, 3, 9, ascii_only) + ' ' + random_sentence(rng, 2, 6, ascii_only);
  a.abstraction_text = random_sentence(rng, 6, 14, ascii_only) + ' ' + random_sentence(rng, 6, 14, ascii_only);
  return a;
}

inline Snapshot random_snapshot(Rng& rng) {
  Snapshot s;
  s.theta = rng.unit() * kTwoPi - kPi;
  const int n = rng.between(0, 4);
  for (int i = 0; i < n; ++i) s.visible_labels.push_back(word_pool()[std::size_t(rng.between(0, int(word_pool().size()) - 1))]);
  std::sort(s.visible_labels.begin(), s.visible_labels.end());
  s.text_render = "view " + random_sentence(rng, 2, 10) + '\n';
  return s;
}

inline LibraryEntry random_entry(Rng& rng, int snapshots) {
  LibraryEntry e;
  e.question = "Where is the " + random_sentence(rng, 1, 3) + "?";
  e.outcome = rng.unit() < 0.5 ? Outcome::kPass : Outcome::kFail;
  e.abstraction = random_abstraction(rng);
  for (int i = 0; i < snapshots; ++i) e.snapshots.push_back(StoredSnapshot::from(random_snapshot(rng), i));
  return e;
}

inline ExperienceLibrary random_library(Rng& rng, int entries, int min_snaps = 0, int max_snaps = 6) {
  ExperienceLibrary lib;
  for (int i = 0; i < entries; ++i) lib.add(random_entry(rng, rng.between(min_snaps, max_snaps)));
  return lib;
}

inline Observation observe_cell(const Cell& c, CellContent content) {
  Observation o;
  o.visible.push_back({c, content, std::nullopt});
  return o;
}

// Random truth map plus a random subset of cells marked seen, always
// including the agent cell as free.
struct Scene {
  GridMap truth;
  OccupancyMap occ;
  Cell agent;
};

inline Scene random_scene(std::uint64_t seed, int w = 20, int h = 20) {
  Rng rng(seed);
  Scene s{GridMap(w, h), OccupancyMap(w, h), {w / 2, h / 2}};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
      s.truth.set({x, y}, border || rng.unit() < 0.2 ? CellContent::kWall : CellContent::kFree);
    }
  s.truth.set(s.agent, CellContent::kFree);
  const double p_seen = 0.3 + 0.6 * rng.unit();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (rng.unit() < p_seen || Cell{x, y} == s.agent) s.occ.integrate(observe_cell({x, y}, s.truth.at({x, y})));
  return s;
}

// Direct per-cell evaluation of the frontier definition, independent of the
// library: flood fill for the island, explicit 3x3 count per cell.
inline std::set<std::pair<int, int>> brute_frontiers(const OccupancyMap& occ, Cell agent, int lo, int hi) {
  const int w = occ.width(), h = occ.height();
  std::vector<char> in(std::size_t(w * h), 0);
  std::vector<Cell> stack{agent};
  in[std::size_t(agent.y * w + agent.x)] = 1;
  while (!stack.empty()) {
    Cell c = stack.back();
    stack.pop_back();
    const Cell nb[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
    for (Cell n : nb) {
      if (n.x < 0 || n.y < 0 || n.x >= w || n.y >= h) continue;
      if (!occ.free.test(n) || in[std::size_t(n.y * w + n.x)]) continue;
      in[std::size_t(n.y * w + n.x)] = 1;
      stack.push_back(n);
    }
  }
  std::set<std::pair<int, int>> out;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!in[std::size_t(y * w + x)]) continue;
      int s = 0;
      for (int yy = y - 1; yy <= y + 1; ++yy)
        for (int xx = x - 1; xx <= x + 1; ++xx)
          if (xx >= 0 && yy >= 0 && xx < w && yy < h && !occ.seen.test({xx, yy})) ++s;
      if (s >= lo && s <= hi) out.insert({x, y});
    }
  return out;
}

}  // namespace reexplore::fixtures
