#pragma once

// Salient experience recall: scene and task similarity rankings over the
// experience library, fused with reciprocal rank fusion, plus the
// episode-bounded working memory.

#include <cctype>
#include <deque>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "reexplore/core.hpp"
#include "reexplore/experience.hpp"
#include "reexplore/hierarchy.hpp"
#include "reexplore/textgen.hpp"

namespace reexplore {

using Vector = std::vector<double>;

inline double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::kDimensionMismatch,
                "embedding dimensions differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void normalize(Vector& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n == 0.0) throw Error(ErrorCode::kInvalidArgument, "cannot normalize a zero vector");
  for (double& x : v) x /= n;
}

/// Embeddings are unit length, so cosine similarity is a dot product.
inline double cosine(const Vector& a, const Vector& b) { return dot(a, b); }

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Vector embed_snapshot(const Snapshot& s) = 0;
  virtual Vector embed_text(const std::string& text) = 0;
};

/// Deterministic hashing embedder. Each feature (a visible label, the
/// 45-degree heading sector, the exact render, or a word) maps to a seeded
/// pseudo-random direction; the embedding is their normalized sum.
class MockEmbedder : public Embedder {
 public:
  explicit MockEmbedder(std::size_t dim = 64, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}

  std::size_t dim() const { return dim_; }

  Vector embed_snapshot(const Snapshot& s) override {
    Vector v(dim_, 0.0);
    for (const auto& l : s.visible_labels) accumulate(v, "label:" + l, 1.0);
    const int sector = int(std::floor((wrap_angle(s.theta) + kPi) / (kPi / 4.0))) % 8;
    accumulate(v, "sector:" + std::to_string(sector), 1.0);
    accumulate(v, "render:" + s.text_render, 0.5);
    return finish(v);
  }

  Vector embed_text(const std::string& text) override {
    Vector v(dim_, 0.0);
    for (const auto& w : words(text)) accumulate(v, "word:" + w, 1.0);
    return finish(v);
  }

  /// Lower-cased alphanumeric runs; bytes >= 0x80 count as word characters
  /// so UTF-8 text tokenizes without decoding.
  static std::vector<std::string> words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char ch : text) {
      if (std::isalnum(ch) || ch >= 0x80) {
        cur.push_back(char(std::tolower(ch)));
      } else if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }

 private:
  static std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
    return h;
  }

  static std::uint64_t splitmix(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  void accumulate(Vector& v, const std::string& feature, double weight) const {
    std::uint64_t state = fnv1a(feature) ^ (seed_ * 0x9E3779B97F4A7C15ULL);
    for (double& x : v) x += weight * (double(splitmix(state) >> 11) * 0x1.0p-53 * 2.0 - 1.0);
  }

  Vector finish(Vector v) const {
    double n = 0.0;
    for (double x : v) n += x * x;
    if (n == 0.0) v[0] = 1.0;
    normalize(v);
    return v;
  }

  std::size_t dim_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------

struct RankedEntry {
  std::string trajectory_id;
  double similarity{0.0};

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

/// Descending similarity, unique ids; rank = position + 1.
using RankedList = std::vector<RankedEntry>;

namespace detail {

inline bool ranked_before(const RankedEntry& a, const RankedEntry& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.trajectory_id < b.trajectory_id;
}

}  // namespace detail

/// Library embeddings, computed once and reused across decisions.
struct LibraryIndex {
  struct SnapshotRow {
    std::string trajectory_id;
    int step{0};
    Vector embedding;
  };
  struct QuestionRow {
    std::string trajectory_id;
    Vector embedding;
  };
  std::vector<SnapshotRow> snapshots;
  std::vector<QuestionRow> questions;
  const ExperienceLibrary* library{nullptr};

  static LibraryIndex build(const ExperienceLibrary& lib, Embedder& embedder) {
    LibraryIndex idx;
    idx.library = &lib;
    for (const auto& e : lib.entries()) {
      idx.questions.push_back({e.trajectory_id, embedder.embed_text(e.question)});
      for (const auto& s : e.snapshots) idx.snapshots.push_back({e.trajectory_id, s.step, embedder.embed_snapshot(s.to_snapshot())});
    }
    return idx;
  }
};

/// For each candidate view, the `m` most similar stored snapshots; their
/// trajectories are merged keeping each id's best similarity.
inline RankedList scene_rank(const std::vector<Snapshot>& candidates, const LibraryIndex& index, Embedder& embedder,
                             std::size_t m) {
  if (m < 1) throw Error(ErrorCode::kInvalidArgument, "m must be at least 1");
  std::map<std::string, double> best;
  struct Hit {
    double sim;
    const LibraryIndex::SnapshotRow* row;
  };
  std::vector<Hit> hits;
  for (const auto& cand : candidates) {
    if (index.snapshots.empty()) break;
    const Vector q = embedder.embed_snapshot(cand);
    hits.clear();
    for (const auto& row : index.snapshots) hits.push_back({cosine(q, row.embedding), &row});
    const std::size_t take = std::min(m, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + std::ptrdiff_t(take), hits.end(), [](const Hit& a, const Hit& b) {
      if (a.sim != b.sim) return a.sim > b.sim;
      if (a.row->trajectory_id != b.row->trajectory_id) return a.row->trajectory_id < b.row->trajectory_id;
      return a.row->step < b.row->step;
    });
    for (std::size_t i = 0; i < take; ++i) {
      auto [it, inserted] = best.emplace(hits[i].row->trajectory_id, hits[i].sim);
      if (!inserted) it->second = std::max(it->second, hits[i].sim);
    }
  }
  RankedList out;
  for (const auto& [id, sim] : best) out.push_back({id, sim});
  std::sort(out.begin(), out.end(), detail::ranked_before);
  return out;
}

inline RankedList scene_rank(const std::vector<Snapshot>& candidates, const ExperienceLibrary& lib, Embedder& embedder,
                             std::size_t m) {
  return scene_rank(candidates, LibraryIndex::build(lib, embedder), embedder, m);
}

/// All stored questions ranked by cosine similarity to `question`.
inline RankedList task_rank(const std::string& question, const LibraryIndex& index, Embedder& embedder) {
  RankedList out;
  if (index.questions.empty()) return out;
  const Vector q = embedder.embed_text(question);
  std::map<std::string, double> best;
  for (const auto& row : index.questions) {
    const double s = cosine(q, row.embedding);
    auto [it, inserted] = best.emplace(row.trajectory_id, s);
    if (!inserted) it->second = std::max(it->second, s);
  }
  for (const auto& [id, sim] : best) out.push_back({id, sim});
  std::sort(out.begin(), out.end(), detail::ranked_before);
  return out;
}

inline RankedList task_rank(const std::string& question, const ExperienceLibrary& lib, Embedder& embedder) {
  return task_rank(question, LibraryIndex::build(lib, embedder), embedder);
}

struct FusedEntry {
  std::string trajectory_id;
  double score{0.0};

  friend bool operator==(const FusedEntry&, const FusedEntry&) = default;
};

/// score(id) = sum over lists containing id of 1 / (k + rank), ranks 1-based.
/// An id missing from a list gets no term from it. Ties go to the smaller id.
inline std::vector<FusedEntry> rrf_fuse(const std::vector<RankedList>& lists, double k = 60.0) {
  if (!(k > 0.0)) throw Error(ErrorCode::kInvalidArgument, "RRF constant must be positive");
  std::map<std::string, double> acc;
  for (const auto& list : lists)
    for (std::size_t i = 0; i < list.size(); ++i) acc[list[i].trajectory_id] += 1.0 / (k + double(i + 1));
  std::vector<FusedEntry> out;
  for (const auto& [id, s] : acc) out.push_back({id, s});
  std::stable_sort(out.begin(), out.end(), [](const FusedEntry& a, const FusedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.trajectory_id < b.trajectory_id;
  });
  return out;
}

inline std::vector<FusedEntry> rrf_fuse(const RankedList& a, const RankedList& b, double k = 60.0) {
  return rrf_fuse(std::vector<RankedList>{a, b}, k);
}

struct ReplayEntry {
  std::string trajectory_id;
  double fused_score{0.0};
  Abstraction abstraction;
};

struct ReplayContext {
  std::vector<ReplayEntry> entries;

  bool empty() const { return entries.empty(); }
};

struct RecallParams {
  std::size_t m{3};
  std::size_t top_k{5};
  double rrf_k{60.0};
};

inline ReplayContext recall(const std::vector<Snapshot>& candidates, const std::string& question,
                            const LibraryIndex& index, Embedder& embedder, const RecallParams& p = {}) {
  if (p.top_k < 1) throw Error(ErrorCode::kInvalidArgument, "K must be at least 1");
  ReplayContext ctx;
  if (!index.library || index.library->empty()) return ctx;
  const auto fused = rrf_fuse(scene_rank(candidates, index, embedder, p.m), task_rank(question, index, embedder), p.rrf_k);
  for (std::size_t i = 0; i < fused.size() && i < p.top_k; ++i) {
    const auto* e = index.library->find(fused[i].trajectory_id);
    ctx.entries.push_back({fused[i].trajectory_id, fused[i].score, e->abstraction});
  }
  return ctx;
}

inline ReplayContext recall(const std::vector<Snapshot>& candidates, const std::string& question,
                            const ExperienceLibrary& lib, Embedder& embedder, const RecallParams& p = {}) {
  return recall(candidates, question, LibraryIndex::build(lib, embedder), embedder, p);
}

// ---------------------------------------------------------------------------
// Working memory

inline constexpr std::size_t kWorkingMemorySize = 5;

inline std::string working_memory_prompt(const std::vector<Snapshot>& recent) {
  std::ostringstream os;
  os << "These are the frontier views most recently chosen in the current episode, oldest first.\n";
  for (std::size_t i = 0; i < recent.size(); ++i) os << "[view " << i << "]\n" << recent[i].text_render;
  os << "Condense them into one brief paragraph: which regions were just explored, which cues were observed, and "
        "which directions remain uncertain.\n";
  return os.str();
}

/// Summarises the last five chosen views. A failing client yields an empty
/// summary and a warning, so exploration carries on.
inline std::string build_working_memory(const std::vector<Snapshot>& chosen, TextGenClient& client,
                                        const GenParams& params = {},
                                        const std::function<void(const std::string&)>& warn = {}) {
  if (chosen.empty()) return {};
  const std::size_t from = chosen.size() > kWorkingMemorySize ? chosen.size() - kWorkingMemorySize : 0;
  const std::vector<Snapshot> recent(chosen.begin() + std::ptrdiff_t(from), chosen.end());
  try {
    return client.generate(working_memory_prompt(recent), params);
  } catch (const std::exception& e) {
    if (warn) warn(std::string("working memory unavailable: ") + e.what());
    return {};
  }
}

}  // namespace reexplore
