#pragma once

// Trajectory logging, chunked verbalisation, retrospective reflection and the
// persistent experience library.

#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "reexplore/core.hpp"
#include "reexplore/hierarchy.hpp"
#include "reexplore/textgen.hpp"

namespace reexplore {

enum class Outcome { kPass, kFail };

inline std::string to_string(Outcome o) { return o == Outcome::kPass ? "PASS" : "FAIL"; }

inline Outcome parse_outcome(const std::string& s) {
  if (s == "PASS") return Outcome::kPass;
  if (s == "FAIL") return Outcome::kFail;
  throw Error(ErrorCode::kParse, "unknown outcome '" + s + "'");
}

struct StepRecord {
  int t{0};
  std::string text;
  double theta{0.0};  // chosen frontier direction
  Cell anchor;
  Snapshot snapshot;
};

struct TrajectoryLog {
  std::string question;
  std::vector<StepRecord> steps;
  Outcome outcome{Outcome::kFail};
  int oracle_length{0};    // G
  int executed_length{0};  // P
};

inline constexpr std::array<const char*, 5> kReflectionBlockNames = {
    "Task Understanding", "Trajectory", "Env-Object Associations",
    "Strategy x Question Type + Directional Priors", "Anti-patterns"};

struct Abstraction {
  std::array<std::string, 5> reflection_blocks;
  std::string abstraction_text;
  std::string source_question;
  Outcome source_outcome{Outcome::kFail};

  friend bool operator==(const Abstraction&, const Abstraction&) = default;
};

// ---------------------------------------------------------------------------
// Verbalisation

/// Contiguous chunks of `chunk_len` steps; a shorter final chunk is kept.
inline std::vector<std::span<const StepRecord>> chunk_trajectory(const TrajectoryLog& log, std::size_t chunk_len = 10) {
  if (chunk_len < 1) throw Error(ErrorCode::kInvalidArgument, "chunk length must be positive");
  std::vector<std::span<const StepRecord>> out;
  std::span<const StepRecord> all(log.steps);
  for (std::size_t i = 0; i < all.size(); i += chunk_len) out.push_back(all.subspan(i, std::min(chunk_len, all.size() - i)));
  return out;
}

inline std::string chunk_prompt(std::span<const StepRecord> chunk, const std::string& question, Outcome outcome) {
  std::ostringstream os;
  os << "You are describing one segment of an embodied exploration episode.\n"
     << "Target question: " << question << '\n'
     << "Final outcome: " << to_string(outcome) << '\n'
     << "Ordered step descriptions:\n";
  for (const auto& s : chunk) os << "- step " << s.t << " (toward " << format_degrees(s.theta) << "deg): " << s.text << '\n';
  os << "Write one concise paragraph describing how the agent moved during this segment: the regions it passed, "
        "the transitions between them and what it observed. Treat the directions only as implicit cues and do not "
        "repeat them verbatim.\n";
  return os.str();
}

inline std::string verbalize_chunk(std::span<const StepRecord> chunk, const std::string& question, Outcome outcome,
                                   TextGenClient& client, const GenParams& params = {}) {
  if (chunk.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot verbalize an empty chunk");
  return client.generate(chunk_prompt(chunk, question, outcome), params);
}

inline std::string summary_prompt(const std::vector<std::string>& captions) {
  std::ostringstream os;
  os << "The following captions describe consecutive segments of one exploration episode, in temporal order.\n";
  for (std::size_t i = 0; i < captions.size(); ++i) os << "[segment " << i << "] " << captions[i] << '\n';
  os << "Merge them into a single coherent and objective description of the full exploration: the sequence of "
        "visited regions, the layout of the environment and the major directional transitions. Do not restate the "
        "question, the outcome or any implementation details.\n";
  return os.str();
}

inline std::string summarize_trajectory(const std::vector<std::string>& captions, TextGenClient& client,
                                        const GenParams& params = {}) {
  if (captions.empty()) throw Error(ErrorCode::kInvalidArgument, "no chunk captions to summarize");
  return client.generate(summary_prompt(captions), params);
}

// ---------------------------------------------------------------------------
// Reflection

inline std::string reflection_prompt(const std::string& trajectory_caption, const std::string& question,
                                     Outcome outcome) {
  std::ostringstream os;
  os << "You are a self-reflective embodied exploration agent. Analyse a completed exploration trajectory in two "
        "parts, REFLECTION and ABSTRACTION.\n\n"
     << "Inputs:\n"
     << "- Target Task: " << question << '\n'
     << "- Exploration Trajectory: " << trajectory_caption << '\n'
     << "- Final Outcome: " << to_string(outcome) << "\n\n"
     << "Output format (labels exact, order fixed):\n"
     << "REFLECTION: exactly five labeled blocks, in this order:\n"
     << "Step 0 (Task Understanding) - 2-3 sentences: what the question asks and what counts as success.\n"
     << "Step 1 (Trajectory) - 8-10 sentences: entry points, regions traversed, key transitions, movement "
        "direction relative to landmarks, and why the route changed.\n"
     << "Step 2 (Env-Object Associations) - 4-6 sentences: generic priors linking object categories to regions; no "
        "scene-specific item names.\n"
     << "Step 3 (Strategy x Question Type + Directional Priors) - 4-6 sentences: concrete guidance per question type "
        "(location, attribute/state, counting/relationship, text-reading), which regions help and which do not.\n"
     << "Step 4 (Anti-patterns) - 2-3 sentences: failure modes to avoid, where not to go, and when to stop.\n"
     << "ABSTRACTION: one cohesive paragraph of 20-24 sentences that turns Step 0-4 into transferable guidance for "
        "similar tasks, without step identifiers and without mentioning views, images or frontier types.\n\n"
     << "Guidelines:\n"
     << "- Refer only to regions, landmarks, paths and task-relevant cues; never to cameras, snapshots or images.\n"
     << "- Keep every block label exactly as given and in order; add no other sections or headers.\n"
     << "- Ground all reasoning in the task, the trajectory caption and the outcome.\n\n"
     << "Begin with the literal label REFLECTION:, then Step 0 to Step 4, then the label ABSTRACTION: followed by "
        "the paragraph.\n";
  return os.str();
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Strip whitespace and markdown emphasis / heading marks around a line.
inline std::string strip_markup(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r*#");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r*");
  return std::string(s.substr(b, e - b + 1));
}

inline bool starts_with_label(const std::string& line, const std::string& label, std::string* rest) {
  if (line.rfind(label, 0) != 0) return false;
  std::string r = line.substr(label.size());
  r = strip_markup(r);
  if (rest) *rest = r;
  return true;
}

inline std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace detail

/// Parse "REFLECTION:" + Step 0..4 + "ABSTRACTION:" + paragraph. Missing,
/// duplicated, extra or reordered blocks and empty bodies are rejected.
inline Abstraction parse_reflection(const std::string& response) {
  static const std::regex step_re(R"(^Step\s+(\d+)\b(.*)$)");
  auto fail = [](const std::string& why) { return Error(ErrorCode::kMalformedReflection, why); };

  enum class Section { kPreamble, kReflection, kStep, kAbstraction };
  Section section = Section::kPreamble;
  int current = -1;
  std::array<std::string, 5> blocks;
  std::string paragraph;

  auto append = [](std::string& dst, const std::string& text) {
    if (text.empty()) return;
    if (!dst.empty()) dst += ' ';
    dst += text;
  };

  for (const auto& raw : detail::split_lines(response)) {
    const std::string line = detail::strip_markup(raw);
    std::string rest;
    std::smatch m;
    if (detail::starts_with_label(line, "REFLECTION:", &rest)) {
      if (section != Section::kPreamble) throw fail("duplicate REFLECTION section");
      if (!rest.empty()) throw fail("unexpected text after REFLECTION:");
      section = Section::kReflection;
    } else if (detail::starts_with_label(line, "ABSTRACTION:", &rest)) {
      if (section == Section::kAbstraction) throw fail("duplicate ABSTRACTION section");
      if (section == Section::kPreamble) throw fail("ABSTRACTION before REFLECTION");
      if (current != 4) throw fail("ABSTRACTION before Step 4");
      section = Section::kAbstraction;
      std::string body = rest;
      detail::starts_with_label(rest, "Abstraction:", &body);
      append(paragraph, body);
    } else if (std::regex_match(line, m, step_re)) {
      if (section == Section::kPreamble) throw fail("Step block before REFLECTION");
      if (section == Section::kAbstraction) throw fail("Step block inside ABSTRACTION");
      const std::string num = m[1].str();
      const int idx = num.size() > 2 ? 99 : std::stoi(num);
      if (idx != current + 1) throw fail("expected Step " + std::to_string(current + 1) + ", found Step " + num);
      if (idx > 4) throw fail("extra block Step " + num);
      current = idx;
      section = Section::kStep;
      std::string tail = m[2].str();
      const auto colon = tail.find(':');
      if (colon != std::string::npos) {
        tail = tail.substr(colon + 1);
      } else {
        const auto lp = tail.find_first_not_of(" \t");
        if (lp != std::string::npos && tail[lp] == '(') {
          const auto rp = tail.find(')', lp);
          tail = rp == std::string::npos ? std::string() : tail.substr(rp + 1);
        }
      }
      append(blocks[std::size_t(idx)], detail::trim(tail));
    } else {
      const std::string text = detail::trim(raw);
      if (text.empty()) continue;
      switch (section) {
        case Section::kPreamble:
          break;
        case Section::kReflection:
          throw fail("text between REFLECTION: and Step 0");
        case Section::kStep:
          append(blocks[std::size_t(current)], text);
          break;
        case Section::kAbstraction: {
          std::string body = text;
          if (paragraph.empty()) detail::starts_with_label(detail::strip_markup(text), "Abstraction:", &body);
          append(paragraph, body);
          break;
        }
      }
    }
  }
  if (section == Section::kPreamble) throw fail("missing REFLECTION section");
  if (current != 4) throw fail("reflection ends before Step 4");
  if (section != Section::kAbstraction) throw fail("missing ABSTRACTION section");
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].empty()) throw fail("Step " + std::to_string(i) + " is empty");
  if (paragraph.empty()) throw fail("empty abstraction paragraph");

  Abstraction a;
  a.reflection_blocks = std::move(blocks);
  a.abstraction_text = std::move(paragraph);
  return a;
}

/// Render an abstraction in the exact document layout the parser accepts.
inline std::string format_reflection(const Abstraction& a) {
  std::ostringstream os;
  os << "REFLECTION:\n";
  for (std::size_t i = 0; i < 5; ++i)
    os << "Step " << i << " (" << kReflectionBlockNames[i] << "): " << a.reflection_blocks[i] << '\n';
  os << "ABSTRACTION:\n" << a.abstraction_text << '\n';
  return os.str();
}

inline Abstraction reflect_and_abstract(const std::string& trajectory_caption, const std::string& question,
                                        Outcome outcome, TextGenClient& client, const GenParams& params = {}) {
  if (trajectory_caption.empty() || question.empty())
    throw Error(ErrorCode::kInvalidArgument, "reflection needs a caption and a question");
  Abstraction a = parse_reflection(client.generate(reflection_prompt(trajectory_caption, question, outcome), params));
  a.source_question = question;
  a.source_outcome = outcome;
  return a;
}

// ---------------------------------------------------------------------------
// Abstraction quality

struct AbstractionQuality {
  int generality{0};
  int relevance{0};
  int conciseness{0};
  int actionability{0};
  double overall{0.0};
};

inline std::string quality_prompt(const Abstraction& a) {
  std::ostringstream os;
  os << "Rate the following exploration abstraction on four dimensions, each from 1 (poor) to 5 (excellent), with a "
        "one-sentence justification per dimension.\n"
     << "Generality: does it state transferable exploration principles rather than retelling one episode?\n"
     << "Relevance: does it fit the original question and stress cues that help answer it?\n"
     << "Conciseness: are the key ideas clear, without redundancy or digressions?\n"
     << "Actionability: does it give concrete, environment-grounded hints for future decisions?\n\n"
     << "Original question: " << a.source_question << '\n'
     << "Abstraction: " << a.abstraction_text << "\n\n"
     << "Answer with four lines of the form \"Generality: <score>\", \"Relevance: <score>\", "
        "\"Conciseness: <score>\", \"Actionability: <score>\".\n";
  return os.str();
}

inline AbstractionQuality score_abstraction(const Abstraction& a, TextGenClient& judge, const GenParams& params = {}) {
  const std::string reply = judge.generate(quality_prompt(a), params);
  auto grab = [&](const char* name) {
    const std::regex re(std::string(name) + R"(\W{0,4}[:=]\s*\**\s*([1-5])\b)", std::regex::icase);
    std::smatch m;
    if (!std::regex_search(reply, m, re))
      throw Error(ErrorCode::kUnparseableJudge, std::string("judge reply lacks a ") + name + " score");
    return std::stoi(m[1].str());
  };
  AbstractionQuality q;
  q.generality = grab("Generality");
  q.relevance = grab("Relevance");
  q.conciseness = grab("Conciseness");
  q.actionability = grab("Actionability");
  q.overall = (q.generality + q.relevance + q.conciseness + q.actionability) / 4.0;
  return q;
}

// ---------------------------------------------------------------------------
// Library

/// Persisted part of a frontier snapshot: what the embedder consumes.
struct StoredSnapshot {
  int step{0};
  double theta{0.0};
  std::vector<std::string> labels;
  std::string text_render;

  Snapshot to_snapshot() const {
    Snapshot s;
    s.theta = theta;
    s.visible_labels = labels;
    s.text_render = text_render;
    return s;
  }

  static StoredSnapshot from(const Snapshot& s, int step) { return {step, s.theta, s.visible_labels, s.text_render}; }

  friend bool operator==(const StoredSnapshot&, const StoredSnapshot&) = default;
};

struct LibraryEntry {
  std::string trajectory_id;
  std::string question;
  Outcome outcome{Outcome::kFail};
  Abstraction abstraction;
  std::vector<StoredSnapshot> snapshots;

  friend bool operator==(const LibraryEntry&, const LibraryEntry&) = default;
};

inline nlohmann::json to_json(const LibraryEntry& e) {
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& s : e.snapshots)
    snaps.push_back({{"step", s.step}, {"theta_rad", s.theta}, {"labels", s.labels}, {"text_render", s.text_render}});
  return {{"trajectory_id", e.trajectory_id},
          {"question", e.question},
          {"outcome", to_string(e.outcome)},
          {"abstraction",
           {{"blocks", std::vector<std::string>(e.abstraction.reflection_blocks.begin(),
                                                e.abstraction.reflection_blocks.end())},
            {"paragraph", e.abstraction.abstraction_text}}},
          {"snapshots", snaps}};
}

inline LibraryEntry entry_from_json(const nlohmann::json& j) {
  LibraryEntry e;
  e.trajectory_id = j.at("trajectory_id").get<std::string>();
  e.question = j.at("question").get<std::string>();
  e.outcome = parse_outcome(j.at("outcome").get<std::string>());
  const auto blocks = j.at("abstraction").at("blocks").get<std::vector<std::string>>();
  if (blocks.size() != 5) throw Error(ErrorCode::kMalformedLibrary, "abstraction must have 5 blocks");
  std::copy(blocks.begin(), blocks.end(), e.abstraction.reflection_blocks.begin());
  e.abstraction.abstraction_text = j.at("abstraction").at("paragraph").get<std::string>();
  e.abstraction.source_question = e.question;
  e.abstraction.source_outcome = e.outcome;
  for (const auto& s : j.at("snapshots"))
    e.snapshots.push_back({s.at("step").get<int>(), s.at("theta_rad").get<double>(),
                           s.at("labels").get<std::vector<std::string>>(), s.at("text_render").get<std::string>()});
  return e;
}

/// Append-only store of abstractions with their source questions and
/// snapshots. Reads may be shared; mutation needs exclusive access.
class ExperienceLibrary {
 public:
  const std::vector<LibraryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  const LibraryEntry* find(const std::string& id) const {
    for (const auto& e : entries_)
      if (e.trajectory_id == id) return &e;
    return nullptr;
  }

  /// Adds the entry, assigning a fresh id when none is set. Returns the id.
  std::string add(LibraryEntry entry) {
    if (entry.trajectory_id.empty()) {
      for (std::size_t n = entries_.size();; ++n) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "traj-%04zu", n);
        if (!find(buf)) {
          entry.trajectory_id = buf;
          break;
        }
      }
    } else if (find(entry.trajectory_id)) {
      throw Error(ErrorCode::kDuplicateId, "duplicate trajectory id " + entry.trajectory_id);
    }
    entry.abstraction.source_question = entry.question;
    entry.abstraction.source_outcome = entry.outcome;
    entries_.push_back(std::move(entry));
    return entries_.back().trajectory_id;
  }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& e : entries_) out += to_json(e).dump() + '\n';
    return out;
  }

  static ExperienceLibrary from_jsonl(const std::string& text) {
    ExperienceLibrary lib;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::trim(line).empty()) continue;
      LibraryEntry e;
      try {
        e = entry_from_json(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::kMalformedLibrary, "library line " + std::to_string(lineno) + ": " + ex.what());
      } catch (const Error& ex) {
        throw Error(ErrorCode::kMalformedLibrary, "library line " + std::to_string(lineno) + ": " + ex.what());
      }
      if (e.trajectory_id.empty()) throw Error(ErrorCode::kMalformedLibrary, "empty trajectory id");
      lib.add(std::move(e));
    }
    return lib;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::kConfig, "cannot write library " + path);
    out << to_jsonl();
  }

  static ExperienceLibrary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kConfig, "cannot read library " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_jsonl(ss.str());
  }

  friend bool operator==(const ExperienceLibrary&, const ExperienceLibrary&) = default;

 private:
  std::vector<LibraryEntry> entries_;
};

}  // namespace reexplore
