#pragma once

// Frontier-selection policies: the coarse-to-fine hierarchical procedure, the
// listwise / pointwise / pairwise baselines, and a ground-truth oracle.

#include <limits>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "reexplore/core.hpp"
#include "reexplore/gridworld.hpp"
#include "reexplore/hierarchy.hpp"
#include "reexplore/retrieval.hpp"
#include "reexplore/textgen.hpp"

namespace reexplore {

enum class Layer { kBvf, kCvf, kFrontier };

inline const char* layer_keyword(Layer l) {
  switch (l) {
    case Layer::kBvf: return "BVF";
    case Layer::kCvf: return "CVF";
    case Layer::kFrontier: return "FRONTIER";
  }
  return "";
}

struct DecisionContext {
  std::string question;
  std::vector<Snapshot> candidates;
  std::string working_memory;           // empty when absent
  std::optional<std::string> egocentric;  // forward view render
  const ReplayContext* replay{nullptr};
  Layer layer{Layer::kBvf};
};

struct Decision {
  int chosen_index{0};
  std::string rationale;
  std::string raw_response;
};

class DecisionError : public Error {
 public:
  DecisionError(ErrorCode code, const std::string& what, long long index = -1) : Error(code, what), index_(index) {}
  long long index() const { return index_; }

 private:
  long long index_;
};

// ---------------------------------------------------------------------------
// Prompts

namespace detail {

inline void context_blocks(std::ostringstream& os, const DecisionContext& ctx) {
  if (ctx.egocentric) os << "\nEgocentric View:\n" << *ctx.egocentric;
  if (!ctx.working_memory.empty()) os << "\nEpisodic Context:\n" << ctx.working_memory << '\n';
  if (ctx.replay && !ctx.replay->empty()) {
    os << "\nRetrospective Experience:\n";
    for (std::size_t i = 0; i < ctx.replay->entries.size(); ++i)
      os << "[experience " << i << "] " << ctx.replay->entries[i].abstraction.abstraction_text << '\n';
  }
}

}  // namespace detail

/// Selection prompt for one layer of the hierarchy.
inline std::string assemble_selection_prompt(const DecisionContext& ctx) {
  const std::string kw = layer_keyword(ctx.layer);
  std::ostringstream os;
  os << "You are an embodied agent exploring an indoor environment to answer a question. At every step you choose "
        "exactly one frontier to explore next.\n\n"
     << "Frontier types:\n"
     << "- Broad-View Frontiers (BVF): coarse direction sectors around you. Pick one BVF to look at more closely.\n"
     << "- Close-up-View Frontiers (CVF): narrower directions inside the chosen BVF. Pick one CVF to move toward.\n\n"
     << "Supporting context, each block present only when available:\n"
     << "- Egocentric View: what you currently face. Use it as a local reference only.\n"
     << "- Episodic Context: a factual summary of this episode so far. Avoid redundancy and prefer novel, "
        "informative directions.\n"
     << "- Retrospective Experience: abstractions distilled from similar past episodes. Extract their directional "
        "tendencies, region ordering and failure patterns, and let them bias you toward informative regions and "
        "away from unproductive ones.\n\n"
     << "Rules:\n"
     << "- You are shown either BVFs or CVFs, never both.\n"
     << "- Reason concretely from the layout, labels and openings visible in each candidate.\n"
     << "- Select exactly one frontier; do not claim that none is suitable.\n"
     << "- Give the rationale first and the decision alone on the last line.\n\n"
     << "Question: " << ctx.question << "\n\n"
     << "Frontier Candidates:\n";
  for (std::size_t i = 0; i < ctx.candidates.size(); ++i) os << kw << ' ' << i << ":\n" << ctx.candidates[i].text_render;
  detail::context_blocks(os, ctx);
  os << "\nReasoning Procedure:\n"
     << "Step 0: Restate the task and confirm that you must pick exactly one " << kw << ".\n"
     << "Step 1: From the Episodic Context, if any, note which regions are explored and which remain unseen.\n"
     << "Step 2: If Retrospective Experience is present, distill one or two concrete rules for this question.\n"
     << "Step 3: Compare the candidates one by one on visible cues, novelty and the distilled rules.\n"
     << "FINAL: Print only the decision line, in the form \"" << kw << " <index>\".\n";
  return os.str();
}

/// Listwise baseline: every candidate in one prompt.
inline std::string assemble_listwise_prompt(const DecisionContext& ctx) {
  std::ostringstream os;
  os << "You are an embodied agent exploring an indoor environment to answer a question. Below are all current "
        "frontier views. Choose exactly one frontier to explore next.\n\n"
     << "Question: " << ctx.question << "\n\n"
     << "Frontier Candidates:\n";
  for (std::size_t i = 0; i < ctx.candidates.size(); ++i) os << "FRONTIER " << i << ":\n" << ctx.candidates[i].text_render;
  detail::context_blocks(os, ctx);
  os << "\nCompare the candidates, give your rationale, then print only the decision line in the form "
        "\"FRONTIER <index>\".\n";
  return os.str();
}

inline std::string assemble_pointwise_prompt(const std::string& question, const Snapshot& view,
                                             const std::string& working_memory, const ReplayContext* replay) {
  DecisionContext ctx{question, {}, working_memory, std::nullopt, replay, Layer::kFrontier};
  std::ostringstream os;
  os << "You are an embodied agent exploring an indoor environment to answer a question. Judge one frontier on its "
        "own.\n\nQuestion: "
     << question << "\n\nCandidate frontier:\n"
     << view.text_render;
  detail::context_blocks(os, ctx);
  os << "\nWould exploring this frontier help answer the question? Explain briefly, then print a final line "
        "\"SCORE <value>\" with a value between 0 and 1.\n";
  return os.str();
}

inline std::string assemble_pairwise_prompt(const std::string& question, const Snapshot& a, const Snapshot& b,
                                            const std::string& working_memory, const ReplayContext* replay) {
  DecisionContext ctx{question, {}, working_memory, std::nullopt, replay, Layer::kFrontier};
  std::ostringstream os;
  os << "You are an embodied agent exploring an indoor environment to answer a question. Compare two frontiers and "
        "keep the more promising one.\n\nQuestion: "
     << question << "\n\nFRONTIER A:\n"
     << a.text_render << "FRONTIER B:\n"
     << b.text_render;
  detail::context_blocks(os, ctx);
  os << "\nJustify your choice, then print a final line \"CHOICE A\" or \"CHOICE B\".\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Parsing

/// Last "<KEYWORD> <i>" occurrence (case-insensitive) decides.
inline Decision parse_choice(const std::string& response, int n_candidates, const std::string& keyword) {
  if (n_candidates < 1) throw Error(ErrorCode::kInvalidArgument, "no candidates");
  const std::regex re("\\b" + keyword + "\\s*:?\\s*(\\d+)", std::regex::icase);
  std::smatch last;
  bool found = false;
  for (auto it = std::sregex_iterator(response.begin(), response.end(), re); it != std::sregex_iterator(); ++it) {
    last = *it;
    found = true;
  }
  if (!found) throw DecisionError(ErrorCode::kNoDecision, "no " + keyword + " decision line in response");
  const std::string digits = last[1].str();
  const long long idx = digits.size() > 9 ? std::numeric_limits<long long>::max() : std::stoll(digits);
  if (idx >= n_candidates) throw DecisionError(ErrorCode::kInvalidIndex, keyword + " " + digits + " out of range", idx);
  Decision d;
  d.chosen_index = int(idx);
  d.rationale = detail::trim(std::string_view(response).substr(0, std::size_t(last.position(0))));
  d.raw_response = response;
  return d;
}

inline Decision parse_decision(const std::string& response, int n_candidates, Layer layer) {
  return parse_choice(response, n_candidates, layer_keyword(layer));
}

// ---------------------------------------------------------------------------
// Selection

/// One selectable direction: where it points, its anchor cell and its view.
struct Candidate {
  Cell anchor;
  double theta{0.0};
  Snapshot view;
};

struct Selection {
  Cell target;
  double theta{0.0};
  Snapshot view;
  int index{0};      // listwise-style index, or BVF index
  int sub_index{-1};  // CVF index; -1 when the BVF anchor was used
  int calls{0};
  std::vector<std::string> events;  // fallbacks and parse failures
};

struct SelectionInputs {
  std::string question;
  std::string working_memory;
  std::optional<std::string> egocentric;
  const ReplayContext* replay{nullptr};
  GenParams params;
};

/// BVF round, then CVF round over the chosen BVF's children. An unusable BVF
/// reply falls back to BVF 0; an unusable CVF reply falls back to the BVF's
/// own anchor. Both rounds always query the client, and a single candidate is
/// chosen whatever the reply.
inline Selection hierarchical_select(const FrontierHierarchy& hier, const SelectionInputs& in, TextGenClient& client) {
  if (hier.empty()) throw Error(ErrorCode::kEmptyHierarchy, "hierarchy has no BVFs");
  Selection sel;

  DecisionContext ctx{in.question, {}, in.working_memory, in.egocentric, in.replay, Layer::kBvf};
  for (const auto& b : hier.bvfs) {
    if (!b.view) throw Error(ErrorCode::kInvalidArgument, "hierarchy views not rendered");
    ctx.candidates.push_back(*b.view);
  }
  int bi = 0;
  {
    const std::string reply = client.generate(assemble_selection_prompt(ctx), in.params);
    ++sel.calls;
    try {
      bi = parse_decision(reply, int(ctx.candidates.size()), Layer::kBvf).chosen_index;
    } catch (const DecisionError& e) {
      if (ctx.candidates.size() > 1) sel.events.push_back(std::string("bvf fallback to 0: ") + e.what());
      bi = 0;
    }
  }
  const Bvf& bvf = hier.bvfs[std::size_t(bi)];
  sel.index = bi;

  ctx.layer = Layer::kCvf;
  ctx.candidates.clear();
  for (const auto& c : bvf.children) {
    if (!c.view) throw Error(ErrorCode::kInvalidArgument, "hierarchy views not rendered");
    ctx.candidates.push_back(*c.view);
  }
  const std::string reply = client.generate(assemble_selection_prompt(ctx), in.params);
  ++sel.calls;
  if (bvf.children.size() == 1) {
    sel.sub_index = 0;
  } else {
    try {
      sel.sub_index = parse_decision(reply, int(ctx.candidates.size()), Layer::kCvf).chosen_index;
    } catch (const DecisionError& e) {
      sel.events.push_back(std::string("cvf fallback to bvf anchor: ") + e.what());
      sel.sub_index = -1;
    }
  }

  if (sel.sub_index >= 0) {
    const Cvf& c = bvf.children[std::size_t(sel.sub_index)];
    sel.target = c.anchor;
    sel.theta = c.theta;
    sel.view = *c.view;
  } else {
    sel.target = bvf.anchor;
    sel.theta = bvf.theta;
    sel.view = *bvf.view;
  }
  return sel;
}

namespace detail {

inline Selection select_candidate(const std::vector<Candidate>& cands, int index) {
  Selection s;
  s.index = index;
  s.target = cands[std::size_t(index)].anchor;
  s.theta = cands[std::size_t(index)].theta;
  s.view = cands[std::size_t(index)].view;
  return s;
}

inline std::vector<Snapshot> views(const std::vector<Candidate>& cands) {
  std::vector<Snapshot> out;
  for (const auto& c : cands) out.push_back(c.view);
  return out;
}

}  // namespace detail

inline Selection listwise_select(const std::vector<Candidate>& cands, const SelectionInputs& in, TextGenClient& client) {
  if (cands.empty()) throw Error(ErrorCode::kEmptyFrontierSet, "no candidates");
  if (cands.size() == 1) return detail::select_candidate(cands, 0);
  DecisionContext ctx{in.question, detail::views(cands), in.working_memory, in.egocentric, in.replay, Layer::kFrontier};
  int idx = 0;
  std::vector<std::string> events;
  try {
    idx = parse_decision(client.generate(assemble_listwise_prompt(ctx), in.params), int(cands.size()), Layer::kFrontier)
              .chosen_index;
  } catch (const Error& e) {
    events.push_back(std::string("listwise fallback to 0: ") + e.what());
  }
  Selection s = detail::select_candidate(cands, idx);
  s.calls = 1;
  s.events = std::move(events);
  return s;
}

/// Parses the last "SCORE <value>" in a pointwise reply.
inline std::optional<double> parse_score(const std::string& reply) {
  static const std::regex re(R"(\bSCORE\s*[:=]?\s*(-?(?:\d+\.?\d*|\.\d+)))", std::regex::icase);
  std::optional<double> out;
  for (auto it = std::sregex_iterator(reply.begin(), reply.end(), re); it != std::sregex_iterator(); ++it) {
    try {
      out = std::stod((*it)[1].str());
    } catch (const std::exception&) {
      out.reset();
    }
  }
  return out;
}

/// Scores every candidate independently; highest score wins, lowest index on
/// ties. Unscored candidates rank below every scored one.
inline Selection pointwise_select(const std::vector<Candidate>& cands, const SelectionInputs& in,
                                  TextGenClient& client) {
  if (cands.empty()) throw Error(ErrorCode::kEmptyFrontierSet, "no candidates");
  if (cands.size() == 1) return detail::select_candidate(cands, 0);
  std::vector<std::string> events;
  int best = -1;
  double best_score = 0.0;
  int calls = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    std::optional<double> score;
    try {
      ++calls;
      score = parse_score(client.generate(assemble_pointwise_prompt(in.question, cands[i].view, in.working_memory, in.replay),
                                          in.params));
    } catch (const std::exception& e) {
      events.push_back("pointwise client failure on " + std::to_string(i) + ": " + e.what());
    }
    if (!score || std::isnan(*score)) {
      events.push_back("pointwise unscored candidate " + std::to_string(i));
      continue;
    }
    if (best < 0 || *score > best_score) best = int(i), best_score = *score;
  }
  if (best < 0) {
    events.push_back("pointwise fallback to 0");
    best = 0;
  }
  Selection s = detail::select_candidate(cands, best);
  s.calls = calls;
  s.events = std::move(events);
  return s;
}

/// Single-elimination bracket in candidate order: (0 v 1), (2 v 3), ... with
/// a bye for an odd last entrant, repeated until one remains. An unusable
/// reply keeps the first operand.
inline Selection pairwise_select(const std::vector<Candidate>& cands, const SelectionInputs& in, TextGenClient& client) {
  if (cands.empty()) throw Error(ErrorCode::kEmptyFrontierSet, "no candidates");
  std::vector<int> round(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) round[i] = int(i);
  std::vector<std::string> events;
  int calls = 0;
  static const std::regex re(R"(\bCHOICE\s*:?\s*([AB])\b)", std::regex::icase);
  while (round.size() > 1) {
    std::vector<int> next;
    for (std::size_t i = 0; i + 1 < round.size(); i += 2) {
      const int a = round[i], b = round[i + 1];
      int winner = a;
      try {
        ++calls;
        const std::string reply = client.generate(
            assemble_pairwise_prompt(in.question, cands[std::size_t(a)].view, cands[std::size_t(b)].view,
                                     in.working_memory, in.replay),
            in.params);
        std::smatch last;
        bool found = false;
        for (auto it = std::sregex_iterator(reply.begin(), reply.end(), re); it != std::sregex_iterator(); ++it)
          last = *it, found = true;
        if (!found) {
          events.push_back("pairwise unparseable reply for " + std::to_string(a) + " v " + std::to_string(b));
        } else if (std::toupper(static_cast<unsigned char>(last[1].str()[0])) == 'B') {
          winner = b;
        }
      } catch (const std::exception& e) {
        events.push_back(std::string("pairwise client failure: ") + e.what());
      }
      next.push_back(winner);
    }
    if (round.size() % 2 == 1) next.push_back(round.back());
    round = std::move(next);
  }
  Selection s = detail::select_candidate(cands, round.front());
  s.calls = calls;
  s.events = std::move(events);
  return s;
}

/// Candidate whose anchor has the smallest true geodesic distance to any cell
/// labeled `target_label`; lowest index on ties.
inline int scripted_oracle_index(const std::vector<Cell>& anchors, const GridMap& truth,
                                 const std::string& target_label) {
  if (anchors.empty()) throw Error(ErrorCode::kEmptyFrontierSet, "no candidates");
  const auto targets = truth.cells_labeled(target_label);
  if (targets.empty()) throw Error(ErrorCode::kNoLabeledTarget, "no cell labeled '" + target_label + "'");
  const auto dist = bfs_distances(truth.free_mask(), targets);
  int best = 0;
  long long best_d = std::numeric_limits<long long>::max();
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const Cell& a = anchors[i];
    const int d = truth.in_bounds(a) ? dist[std::size_t(a.y) * truth.width() + a.x] : -1;
    const long long dd = d < 0 ? std::numeric_limits<long long>::max() - 1 : d;
    if (dd < best_d) best = int(i), best_d = dd;
  }
  return best;
}

inline Selection scripted_oracle_select(const std::vector<Candidate>& cands, const GridMap& truth,
                                        const std::string& target_label) {
  std::vector<Cell> anchors;
  for (const auto& c : cands) anchors.push_back(c.anchor);
  return detail::select_candidate(cands, scripted_oracle_index(anchors, truth, target_label));
}

/// Every CVF of the hierarchy as a flat candidate list, BVF-major.
inline std::vector<Candidate> flatten_candidates(const FrontierHierarchy& h) {
  std::vector<Candidate> out;
  for (const auto& b : h.bvfs)
    for (const auto& c : b.children) out.push_back({c.anchor, c.theta, c.view ? *c.view : Snapshot{}});
  return out;
}

}  // namespace reexplore
