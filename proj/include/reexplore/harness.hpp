#pragma once

// Episode orchestration, experience-set collection, synthetic map corpora and
// ablation sweeps.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "reexplore/core.hpp"
#include "reexplore/experience.hpp"
#include "reexplore/gridworld.hpp"
#include "reexplore/hierarchy.hpp"
#include "reexplore/metrics.hpp"
#include "reexplore/occupancy.hpp"
#include "reexplore/policy.hpp"
#include "reexplore/retrieval.hpp"
#include "reexplore/textgen.hpp"

namespace reexplore {

enum class PolicyKind { kHierarchical, kListwise, kPointwise, kPairwise, kOracle };

inline std::string to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::kHierarchical: return "hierarchical";
    case PolicyKind::kListwise: return "listwise";
    case PolicyKind::kPointwise: return "pointwise";
    case PolicyKind::kPairwise: return "pairwise";
    case PolicyKind::kOracle: return "oracle";
  }
  return "";
}

inline PolicyKind parse_policy(const std::string& s) {
  for (auto p : {PolicyKind::kHierarchical, PolicyKind::kListwise, PolicyKind::kPointwise, PolicyKind::kPairwise,
                 PolicyKind::kOracle})
    if (to_string(p) == s) return p;
  throw Error(ErrorCode::kConfig, "unknown policy '" + s + "'");
}

inline constexpr std::array<const char*, 7> kCategories = {
    "object recognition",        "object localization",  "attribute recognition", "spatial understanding",
    "object state recognition", "functional reasoning", "world knowledge"};

struct Question {
  std::string question_id;
  std::string text;
  std::string target_label;
  std::string category;
  std::string map_path;
  std::optional<Cell> start;
  std::string ground_truth;
  std::vector<std::string> paraphrases;
};

struct RunConfig {
  PolicyKind policy{PolicyKind::kHierarchical};
  bool replay{true};
  bool working_memory{true};
  RecallParams recall;
  FrontierBand band;
  std::size_t min_bvf_size{3};
  std::size_t min_cvf_size{2};
  int max_steps{50};
  std::uint64_t seed{0};
  SensingParams sensing;
  GenParams gen;
  std::size_t chunk_len{10};

  // Backends: a URL selects the HTTP client, a script path the mock.
  std::string textgen_url, textgen_script;
  std::string embedder_url;
  std::size_t embed_dim{64};
  std::string judge_url, judge_script;

  std::string questions_path;
  std::string library_path;

  void validate() const {
    if (max_steps < 1) throw Error(ErrorCode::kConfig, "max_steps must be at least 1");
    if (recall.top_k < 1 || recall.m < 1) throw Error(ErrorCode::kConfig, "K and m must be at least 1");
    if (!(recall.rrf_k > 0.0)) throw Error(ErrorCode::kConfig, "k_rrf must be positive");
    if (band.min < 1 || band.min > band.max || band.max > 9) throw Error(ErrorCode::kConfig, "need 1 <= tau_min <= tau_max <= 9");
    if (sensing.range_cells < 1 || !(sensing.fov_rad > 0.0) || sensing.fov_rad > kTwoPi + 1e-12)
      throw Error(ErrorCode::kConfig, "invalid sensing parameters");
    if (chunk_len < 1) throw Error(ErrorCode::kConfig, "chunk_len must be at least 1");
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"policy", to_string(c.policy)},
          {"replay", c.replay},
          {"working_memory", c.working_memory},
          {"top_k", c.recall.top_k},
          {"m", c.recall.m},
          {"rrf_k", c.recall.rrf_k},
          {"tau_min", c.band.min},
          {"tau_max", c.band.max},
          {"tau_size0", c.min_bvf_size},
          {"tau_size1", c.min_cvf_size},
          {"max_steps", c.max_steps},
          {"seed", c.seed},
          {"fov_deg", deg(c.sensing.fov_rad)},
          {"range_cells", c.sensing.range_cells},
          {"camera_height_m", c.sensing.camera_height_m},
          {"camera_pitch_deg", c.sensing.camera_pitch_deg},
          {"image_width", c.sensing.image_width},
          {"image_resized_width", c.sensing.image_resized_width},
          {"temperature", c.gen.temperature},
          {"max_tokens", c.gen.max_tokens},
          {"top_p", c.gen.top_p},
          {"chunk_len", c.chunk_len},
          {"textgen_url", c.textgen_url},
          {"textgen_script", c.textgen_script},
          {"embedder_url", c.embedder_url},
          {"embed_dim", c.embed_dim},
          {"judge_url", c.judge_url},
          {"judge_script", c.judge_script},
          {"questions", c.questions_path},
          {"library", c.library_path}};
}

/// Apply one key/value setting. Values arrive as JSON (numbers, booleans,
/// strings); bare strings from key=value files are accepted too.
inline void apply_setting(RunConfig& c, const std::string& key, const nlohmann::json& v) {
  auto str = [&] { return v.is_string() ? v.get<std::string>() : v.dump(); };
  auto num = [&] {
    if (v.is_number()) return v.get<double>();
    try {
      std::size_t used = 0;
      const double d = std::stod(str(), &used);
      if (used != str().size()) throw std::invalid_argument(key);
      return d;
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfig, "setting '" + key + "' expects a number");
    }
  };
  auto boolean = [&] {
    if (v.is_boolean()) return v.get<bool>();
    const std::string s = str();
    if (s == "true" || s == "1" || s == "on") return true;
    if (s == "false" || s == "0" || s == "off") return false;
    throw Error(ErrorCode::kConfig, "setting '" + key + "' expects a boolean");
  };
  auto count = [&] {
    const double d = num();
    if (d < 0 || d != std::floor(d)) throw Error(ErrorCode::kConfig, "setting '" + key + "' expects a count");
    return std::size_t(d);
  };

  if (key == "policy") c.policy = parse_policy(str());
  else if (key == "replay") c.replay = boolean();
  else if (key == "working_memory") c.working_memory = boolean();
  else if (key == "top_k" || key == "K") c.recall.top_k = count();
  else if (key == "m") c.recall.m = count();
  else if (key == "rrf_k" || key == "k_rrf") c.recall.rrf_k = num();
  else if (key == "tau_min") c.band.min = int(count());
  else if (key == "tau_max") c.band.max = int(count());
  else if (key == "tau_size0") c.min_bvf_size = count();
  else if (key == "tau_size1") c.min_cvf_size = count();
  else if (key == "max_steps") c.max_steps = int(num());
  else if (key == "seed") c.seed = count();
  else if (key == "fov_deg") c.sensing.fov_rad = rad(num());
  else if (key == "range_cells") c.sensing.range_cells = int(count());
  else if (key == "camera_height_m") c.sensing.camera_height_m = num();
  else if (key == "camera_pitch_deg") c.sensing.camera_pitch_deg = num();
  else if (key == "image_width") c.sensing.image_width = int(count());
  else if (key == "image_resized_width") c.sensing.image_resized_width = int(count());
  else if (key == "temperature") c.gen.temperature = num();
  else if (key == "max_tokens") c.gen.max_tokens = int(count());
  else if (key == "top_p") c.gen.top_p = num();
  else if (key == "chunk_len") c.chunk_len = count();
  else if (key == "textgen_url") c.textgen_url = str();
  else if (key == "textgen_script") c.textgen_script = str();
  else if (key == "embedder_url") c.embedder_url = str();
  else if (key == "embed_dim") c.embed_dim = count();
  else if (key == "judge_url") c.judge_url = str();
  else if (key == "judge_script") c.judge_script = str();
  else if (key == "questions") c.questions_path = str();
  else if (key == "library") c.library_path = str();
  else throw Error(ErrorCode::kConfig, "unknown setting '" + key + "'");
}

/// Parse a config document: a JSON object, or "key = value" lines with '#'
/// comments.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kConfig, std::string("bad JSON config: ") + e.what());
    }
    for (const auto& [k, v] : j.items()) apply_setting(base, k, v);
  } else {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string t = detail::trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::kConfig, "expected key=value: " + t);
      apply_setting(base, detail::trim(t.substr(0, eq)), nlohmann::json(detail::trim(t.substr(eq + 1))));
    }
  }
  base.validate();
  return base;
}

inline nlohmann::json to_json(const Question& q) {
  nlohmann::json j = {{"question_id", q.question_id}, {"text", q.text},         {"target_label", q.target_label},
                      {"category", q.category},       {"map", q.map_path},      {"ground_truth", q.ground_truth},
                      {"paraphrases", q.paraphrases}};
  if (q.start) j["start"] = {q.start->x, q.start->y};
  return j;
}

inline Question question_from_json(const nlohmann::json& j) {
  Question q;
  q.question_id = j.at("question_id").get<std::string>();
  q.text = j.at("text").get<std::string>();
  q.target_label = j.at("target_label").get<std::string>();
  q.category = j.value("category", "");
  q.map_path = j.value("map", "");
  if (j.contains("start")) q.start = Cell{j.at("start").at(0).get<int>(), j.at("start").at(1).get<int>()};
  q.ground_truth = j.value("ground_truth", "");
  if (j.contains("paraphrases")) q.paraphrases = j.at("paraphrases").get<std::vector<std::string>>();
  return q;
}

/// Questions file: {"questions": [...]}, map paths relative to the file.
inline std::vector<Question> load_questions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read questions file " + path);
  std::vector<Question> out;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& q : j.at("questions")) out.push_back(question_from_json(q));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, "bad questions file " + path + ": " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  for (auto& q : out)
    if (!q.map_path.empty() && std::filesystem::path(q.map_path).is_relative()) q.map_path = (dir / q.map_path).string();
  return out;
}

inline GridMap load_map_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read map " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_map(ss.str());
}

// ---------------------------------------------------------------------------
// Episodes

/// Backends used by one run. Any pointer may be null when the configuration
/// does not need it.
struct Backends {
  TextGenClient* policy{nullptr};
  Embedder* embedder{nullptr};
  TextGenClient* judge{nullptr};
};

struct StepLog {
  StepRecord record;
  Cell target;
  Cell pose;
  int bvf{-1};
  int cvf{-1};
  int moved{0};
  bool replan{false};
  bool approach{false};
};

struct RecallTrace {
  int t{0};
  std::vector<FusedEntry> entries;
};

struct EpisodeLog {
  nlohmann::json config;
  Question question;
  Cell start;
  std::vector<StepLog> steps;
  std::vector<std::pair<int, std::string>> fallback_events;
  std::vector<RecallTrace> recall_traces;
  std::vector<std::string> warnings;
  int decisions{0};
  int motion_cells{0};
  std::string termination;
  EpisodeResult result;

  bool answered() const { return result.answer.has_value(); }

  TrajectoryLog trajectory() const {
    TrajectoryLog t;
    t.question = question.text;
    for (const auto& s : steps) t.steps.push_back(s.record);
    t.outcome = answered() ? Outcome::kPass : Outcome::kFail;
    t.oracle_length = result.oracle_length;
    t.executed_length = motion_cells;
    return t;
  }
};

inline nlohmann::json to_json(const EpisodeLog& log) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : log.steps)
    steps.push_back({{"t", s.record.t},
                     {"text", s.record.text},
                     {"theta_rad", s.record.theta},
                     {"anchor", {s.record.anchor.x, s.record.anchor.y}},
                     {"target", {s.target.x, s.target.y}},
                     {"pose", {s.pose.x, s.pose.y}},
                     {"bvf", s.bvf},
                     {"cvf", s.cvf},
                     {"moved", s.moved},
                     {"replan", s.replan},
                     {"approach", s.approach},
                     {"labels", s.record.snapshot.visible_labels}});
  nlohmann::json events = nlohmann::json::array();
  for (const auto& [t, e] : log.fallback_events) events.push_back({{"t", t}, {"event", e}});
  nlohmann::json traces = nlohmann::json::array();
  for (const auto& tr : log.recall_traces) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : tr.entries) entries.push_back({{"id", e.trajectory_id}, {"score", e.score}});
    traces.push_back({{"t", tr.t}, {"entries", entries}});
  }
  return {{"config", log.config},
          {"question", to_json(log.question)},
          {"start", {log.start.x, log.start.y}},
          {"steps", steps},
          {"fallback_events", events},
          {"recall_traces", traces},
          {"warnings", log.warnings},
          {"decisions", log.decisions},
          {"motion_cells", log.motion_cells},
          {"termination", log.termination},
          {"result", to_json(log.result)}};
}

namespace detail {

inline const char* compass(double theta) {
  // Grid y grows downward, so +90 degrees points south.
  static const char* names[8] = {"east", "southeast", "south", "southwest", "west", "northwest", "north", "northeast"};
  int sector = int(std::lround(wrap_angle(theta) / (kPi / 4.0)));
  sector = ((sector % 8) + 8) % 8;
  return names[sector];
}

inline std::string signed_int(int v) { return (v >= 0 ? "+" : "") + std::to_string(v); }

inline std::string labels_phrase(const std::vector<std::string>& labels) {
  if (labels.empty()) return "no labeled objects";
  std::string s;
  std::vector<std::string> uniq = labels;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  for (std::size_t i = 0; i < uniq.size(); ++i) s += (i ? ", " : "") + uniq[i];
  return s;
}

inline Cell default_start(const GridMap& map) {
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x)
      if (map.is_free({x, y})) return {x, y};
  throw Error(ErrorCode::kConfig, "map has no free cell");
}

/// Free cells at Manhattan distance <= 1 from any target cell.
inline CellMask goal_mask(const CellMask& passable, const std::vector<Cell>& targets) {
  CellMask goal(passable.width(), passable.height());
  for (const Cell& t : targets) {
    if (passable.test(t)) goal.set(t);
    for (const Cell& n : kNeighbors4) {
      const Cell c{t.x + n.x, t.y + n.y};
      if (passable.test(c)) goal.set(c);
    }
  }
  return goal;
}

/// One candidate per frontier cell, viewed from the agent towards it.
inline std::vector<Candidate> frontier_candidates(const std::vector<Cell>& frontiers, const GridMap& map,
                                                  const OccupancyMap& occ, const Cell& agent,
                                                  const SensingParams& sensing) {
  std::vector<Candidate> out;
  out.reserve(frontiers.size());
  for (const Cell& f : frontiers) {
    const double theta = f == agent ? 0.0 : bearing(agent, f);
    out.push_back({f, theta, render_snapshot(map, occ, agent, theta, sensing)});
  }
  return out;
}

}  // namespace detail

/// Shortest step count from `start` to a free cell adjacent to (or on) a cell
/// labeled `label`, over the true map; nullopt when none is reachable.
inline std::optional<int> oracle_length(const GridMap& map, const Cell& start, const std::string& label) {
  const CellMask free = map.free_mask();
  const CellMask goal = detail::goal_mask(free, map.cells_labeled(label));
  const auto dist = bfs_distances(free, {start});
  std::optional<int> best;
  for (const Cell& g : goal.cells()) {
    const int d = dist[std::size_t(g.y) * map.width() + g.x];
    if (d >= 0 && (!best || d < *best)) best = d;
  }
  return best;
}

/// Runs one question to completion: sense, integrate, extract frontiers,
/// build the hierarchy, summarise working memory, recall experience, select,
/// move. The episode ends with an answer once a target-labeled cell has been
/// seen and the agent stands on or next to it, or without one when the
/// decision budget or the frontier set runs out.
inline EpisodeLog run_episode(const RunConfig& config, const GridMap& map, const Question& question,
                              const LibraryIndex* library, const Backends& backends) {
  config.validate();
  if (map.cells_labeled(question.target_label).empty())
    throw Error(ErrorCode::kConfig, "target label '" + question.target_label + "' does not appear in the map");
  const bool needs_client = config.policy != PolicyKind::kOracle;
  if (needs_client && !backends.policy) throw Error(ErrorCode::kConfig, "policy needs a text-generation backend");
  const bool use_replay = config.replay && library && library->library && !library->library->empty();
  if (use_replay && !backends.embedder) throw Error(ErrorCode::kConfig, "replay needs an embedder");
  if (config.working_memory && !backends.policy && needs_client)
    throw Error(ErrorCode::kConfig, "working memory needs a text-generation backend");

  EpisodeLog log;
  log.config = to_json(config);
  log.question = question;
  log.start = question.start ? *question.start : detail::default_start(map);
  if (!map.in_bounds(log.start) || map.is_wall(log.start)) throw Error(ErrorCode::kConfig, "start cell is not free");

  AgentPose pose{log.start, 0.0};
  OccupancyMap occ(map.width(), map.height());
  std::map<Cell, std::string, CellOrder> seen_targets;
  auto sense = [&](const Observation& obs) {
    occ.integrate(obs);
    for (const auto& v : obs.visible)
      if (v.label && *v.label == question.target_label) seen_targets.emplace(v.cell, *v.label);
  };
  auto look_around = [&] {
    sense(cast_rays(map, pose, kTwoPi, config.sensing.range_cells));
    sense(proximity_observation(map, pose));
  };
  auto warn = [&](const std::string& w) { log.warnings.push_back(w); };

  const auto g = oracle_length(map, log.start, question.target_label);
  log.result.question_id = question.question_id;
  log.result.category = question.category;
  log.result.oracle_length = g.value_or(0);

  look_around();
  std::vector<Snapshot> chosen_views;
  bool answered = false;

  auto describe = [&](const StepLog& s, const std::string& lead) {
    std::ostringstream os;
    os << lead << " toward " << format_degrees(s.record.theta) << "deg (" << detail::compass(s.record.theta)
       << "), moving " << s.moved << " cells to (" << s.pose.x << ", " << s.pose.y << "); offset ("
       << detail::signed_int(s.pose.x - log.start.x) << ", " << detail::signed_int(s.pose.y - log.start.y)
       << ") from start; the view showed " << detail::labels_phrase(s.record.snapshot.visible_labels) << '.';
    return os.str();
  };

  auto move_to = [&](const Cell& target, StepLog& step) {
    const CellMask island = reachable_island(occ, pose.cell);
    const StepOutcome out = step_to(map, island, pose, target, config.sensing);
    for (const auto& o : out.observations) sense(o);
    pose = out.pose;
    step.moved = out.steps;
    step.replan = out.replan;
    step.pose = pose.cell;
    log.motion_cells += out.steps;
    look_around();
  };

  try {
    while (true) {
      if (!seen_targets.empty()) {
        std::vector<Cell> targets;
        for (const auto& [c, l] : seen_targets) targets.push_back(c);
        const CellMask island = reachable_island(occ, pose.cell);
        const CellMask goal = detail::goal_mask(island, targets);
        if (goal.test(pose.cell)) {
          answered = true;
          log.termination = "target reached";
          break;
        }
        const auto dist = bfs_distances(island, {pose.cell});
        std::optional<Cell> nearest;
        int nearest_d = 0;
        for (const Cell& c : goal.cells()) {
          const int d = dist[std::size_t(c.y) * map.width() + c.x];
          if (d >= 0 && (!nearest || d < nearest_d)) nearest = c, nearest_d = d;
        }
        if (nearest) {
          if (log.decisions >= config.max_steps) {
            log.termination = "step budget exhausted";
            break;
          }
          StepLog step;
          step.approach = true;
          step.target = *nearest;
          step.record.t = log.decisions;
          step.record.anchor = *nearest;
          step.record.theta = bearing(pose.cell, *nearest);
          step.record.snapshot = render_snapshot(map, occ, pose.cell, step.record.theta, config.sensing);
          move_to(*nearest, step);
          step.record.text = describe(step, "Approached the " + question.target_label);
          log.steps.push_back(std::move(step));
          ++log.decisions;
          continue;
        }
      }

      if (log.decisions >= config.max_steps) {
        log.termination = "step budget exhausted";
        break;
      }
      const auto frontiers = extract_frontiers(occ, pose.cell, config.band);
      if (frontiers.empty()) {
        log.termination = "frontiers exhausted";
        break;
      }

      const int t = log.decisions;
      HierarchyParams hp{config.seed * 1000003ULL + std::uint64_t(t), config.min_bvf_size, config.min_cvf_size};
      FrontierHierarchy hier = build_hierarchy(frontier_cells(frontiers), pose, hp);
      attach_views(hier, map, occ, config.sensing);
      // Hierarchy-driven policies pick among CVFs; the flat baselines see
      // every frontier cell.
      const bool flat = config.policy == PolicyKind::kListwise || config.policy == PolicyKind::kPointwise ||
                        config.policy == PolicyKind::kPairwise;
      const auto candidates =
          flat ? detail::frontier_candidates(hier.frontiers, map, occ, pose.cell, config.sensing) : flatten_candidates(hier);

      SelectionInputs in;
      in.question = question.text;
      in.params = config.gen;
      ReplayContext replay;
      if (needs_client) {
        in.egocentric = render_snapshot(map, occ, pose.cell, pose.heading, config.sensing).text_render;
        if (config.working_memory) in.working_memory = build_working_memory(chosen_views, *backends.policy, config.gen, warn);
        if (use_replay) {
          std::vector<Snapshot> views;
          for (const auto& c : candidates) views.push_back(c.view);
          replay = recall(views, question.text, *library, *backends.embedder, config.recall);
          RecallTrace trace{t, {}};
          for (const auto& e : replay.entries) trace.entries.push_back({e.trajectory_id, e.fused_score});
          log.recall_traces.push_back(std::move(trace));
          in.replay = &replay;
        }
      }

      Selection sel;
      switch (config.policy) {
        case PolicyKind::kHierarchical: sel = hierarchical_select(hier, in, *backends.policy); break;
        case PolicyKind::kListwise: sel = listwise_select(candidates, in, *backends.policy); break;
        case PolicyKind::kPointwise: sel = pointwise_select(candidates, in, *backends.policy); break;
        case PolicyKind::kPairwise: sel = pairwise_select(candidates, in, *backends.policy); break;
        case PolicyKind::kOracle: sel = scripted_oracle_select(candidates, map, question.target_label); break;
      }
      for (auto& e : sel.events) log.fallback_events.emplace_back(t, std::move(e));

      StepLog step;
      step.target = sel.target;
      step.record.t = t;
      step.record.theta = sel.theta;
      step.record.anchor = sel.target;
      step.record.snapshot = sel.view;
      if (config.policy == PolicyKind::kHierarchical) {
        step.bvf = sel.index;
        step.cvf = sel.sub_index;
      } else {
        step.cvf = sel.index;
      }
      move_to(sel.target, step);
      step.record.text = describe(step, "Explored a frontier");
      chosen_views.push_back(step.record.snapshot);
      log.steps.push_back(std::move(step));
      ++log.decisions;
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    log.termination = std::string("runtime fault: ") + e.what();
    log.warnings.push_back(log.termination);
  }

  EpisodeResult& r = log.result;
  if (answered) {
    const Cell t = seen_targets.begin()->first;
    r.answer = "The " + question.target_label + " is at cell (" + std::to_string(t.x) + ", " + std::to_string(t.y) + ").";
    r.executed_length = log.motion_cells;
    r.valid = true;
    if (backends.judge) {
      const std::string truth = question.ground_truth.empty() ? "the " + question.target_label : question.ground_truth;
      r.judge_score = grade_answer(question.text, truth, *r.answer, question.paraphrases, *backends.judge, config.gen);
    }
  }
  r.fallback_score = fallback_score(r.answer, question.target_label);
  return log;
}

// ---------------------------------------------------------------------------
// Experience collection

struct EpisodeSpec {
  GridMap map;
  Question question;
};

struct CollectionClients {
  TextGenClient* policy{nullptr};       // frontier selection during rollouts
  TextGenClient* abstraction{nullptr};  // chunk captions, summary, reflection
};

/// Rolls out every training episode without replay and turns each trajectory
/// into a library entry. A trajectory whose abstraction cannot be produced is
/// skipped with a warning.
inline ExperienceLibrary build_experience_set(const RunConfig& config, const std::vector<EpisodeSpec>& training,
                                              const CollectionClients& clients,
                                              std::vector<std::string>* warnings = nullptr) {
  if (!clients.abstraction && !training.empty())
    throw Error(ErrorCode::kConfig, "experience building needs an abstraction backend");
  RunConfig rollout = config;
  rollout.replay = false;
  ExperienceLibrary lib;
  for (const auto& spec : training) {
    const EpisodeLog log = run_episode(rollout, spec.map, spec.question, nullptr, Backends{clients.policy, nullptr, nullptr});
    const TrajectoryLog traj = log.trajectory();
    try {
      std::vector<std::string> captions;
      for (const auto& chunk : chunk_trajectory(traj, config.chunk_len))
        captions.push_back(verbalize_chunk(chunk, traj.question, traj.outcome, *clients.abstraction, config.gen));
      if (captions.empty()) captions.push_back("The agent did not move during this episode.");
      const std::string caption = summarize_trajectory(captions, *clients.abstraction, config.gen);
      LibraryEntry e;
      e.question = traj.question;
      e.outcome = traj.outcome;
      e.abstraction = reflect_and_abstract(caption, traj.question, traj.outcome, *clients.abstraction, config.gen);
      for (const auto& s : traj.steps) e.snapshots.push_back(StoredSnapshot::from(s.snapshot, s.t));
      lib.add(std::move(e));
    } catch (const std::exception& ex) {
      if (warnings) warnings->push_back("skipped trajectory for " + spec.question.question_id + ": " + ex.what());
    }
  }
  return lib;
}

// ---------------------------------------------------------------------------
// Map corpora

enum class MapStyle { kRooms, kMaze };

inline MapStyle parse_style(const std::string& s) {
  if (s == "rooms") return MapStyle::kRooms;
  if (s == "maze") return MapStyle::kMaze;
  throw Error(ErrorCode::kConfig, "unknown map style '" + s + "'");
}

inline constexpr std::array<const char*, 8> kLabelVocabulary = {"sofa", "mug",        "plant", "lamp",
                                                                "sink", "television", "bed",   "bookshelf"};

struct GeneratedMap {
  std::string name;
  GridMap map;
  Question question;
};

namespace detail {

/// Recursive-backtracker maze on a lattice of 2x2 free blocks separated by
/// single walls, so corridors are two cells wide.
inline GridMap carve_maze(int size, Rng& rng) {
  const int n = (size - 1) / 3;  // blocks per axis
  GridMap m(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) m.set({x, y}, CellContent::kWall);
  auto open_block = [&](int i, int j) {
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) m.set({1 + 3 * i + dx, 1 + 3 * j + dy}, CellContent::kFree);
  };
  std::vector<char> visited(std::size_t(n) * n, 0);
  std::vector<Cell> stack{{0, 0}};
  visited[0] = 1;
  open_block(0, 0);
  while (!stack.empty()) {
    const Cell c = stack.back();
    std::vector<Cell> options;
    for (const Cell& d : kNeighbors4) {
      const Cell nxt{c.x + d.x, c.y + d.y};
      if (nxt.x >= 0 && nxt.y >= 0 && nxt.x < n && nxt.y < n && !visited[std::size_t(nxt.y) * n + nxt.x])
        options.push_back(nxt);
    }
    if (options.empty()) {
      stack.pop_back();
      continue;
    }
    const Cell nxt = options[rng.below(options.size())];
    visited[std::size_t(nxt.y) * n + nxt.x] = 1;
    open_block(nxt.x, nxt.y);
    if (nxt.y == c.y) {
      const int wx = 3 + 3 * std::min(c.x, nxt.x);
      for (int k = 0; k < 2; ++k) m.set({wx, 1 + 3 * c.y + k}, CellContent::kFree);
    } else {
      const int wy = 3 + 3 * std::min(c.y, nxt.y);
      for (int k = 0; k < 2; ++k) m.set({1 + 3 * c.x + k, wy}, CellContent::kFree);
    }
    stack.push_back(nxt);
  }
  return m;
}

/// No free cell in the 5x5 block around `c` is left with fewer than two free
/// 4-neighbours.
inline bool no_pockets_near(const GridMap& m, const Cell& c) {
  for (int y = c.y - 2; y <= c.y + 2; ++y)
    for (int x = c.x - 2; x <= c.x + 2; ++x) {
      if (!m.is_free({x, y})) continue;
      int open = 0;
      for (const Cell& d : kNeighbors4) open += m.is_free({x + d.x, y + d.y}) ? 1 : 0;
      if (open < 2) return false;
    }
  return true;
}

inline bool connected(const GridMap& m) {
  const CellMask free = m.free_mask();
  const auto cells = free.cells();
  if (cells.empty()) return false;
  const auto dist = bfs_distances(free, {cells.front()});
  for (const Cell& c : cells)
    if (dist[std::size_t(c.y) * m.width() + c.x] < 0) return false;
  return true;
}

/// 3x3 rooms separated by single walls, one doorway per shared wall, plus
/// scattered single-cell obstacles that keep the free space connected and
/// pocket-free.
inline GridMap build_rooms(int size, Rng& rng) {
  GridMap m(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      m.set({x, y}, (x == 0 || y == 0 || x == size - 1 || y == size - 1) ? CellContent::kWall : CellContent::kFree);
  const int a = size / 3, b = 2 * size / 3;
  const int bounds[4] = {0, a, b, size - 1};
  for (int w : {a, b}) {
    for (int i = 1; i < size - 1; ++i) {
      m.set({w, i}, CellContent::kWall);
      m.set({i, w}, CellContent::kWall);
    }
  }
  for (int w : {a, b})
    for (int s = 0; s < 3; ++s) {
      const int lo = bounds[s] + 1, hi = bounds[s + 1] - 1;
      if (lo > hi) continue;
      m.set({w, rng.between(lo, hi)}, CellContent::kFree);
      m.set({rng.between(lo, hi), w}, CellContent::kFree);
    }
  const int obstacles = size * size / 30;
  for (int i = 0; i < obstacles; ++i) {
    const Cell c{rng.between(1, size - 2), rng.between(1, size - 2)};
    if (m.is_wall(c)) continue;
    m.set(c, CellContent::kWall);
    if (!no_pockets_near(m, c) || !connected(m)) m.set(c, CellContent::kFree);
  }
  return m;
}

inline std::string question_text(const std::string& category, const std::string& label) {
  if (category == "object recognition") return "What object is kept in the room with the " + label + "?";
  if (category == "object localization") return "Where is the " + label + "?";
  if (category == "attribute recognition") return "What color is the " + label + "?";
  if (category == "spatial understanding") return "Which room is the " + label + " in?";
  if (category == "object state recognition") return "Is the " + label + " turned on?";
  if (category == "functional reasoning") return "Where could I find a " + label + " to use?";
  return "Is there a " + label + " in this home?";
}

}  // namespace detail

/// Deterministic synthetic maps, each with one target label reachable from
/// the start cell and a few distractor labels.
inline std::vector<GeneratedMap> gen_maps(std::uint64_t seed, int count, int size, MapStyle style) {
  if (size < 7) throw Error(ErrorCode::kInvalidArgument, "map size must be at least 7");
  std::vector<GeneratedMap> out;
  for (int i = 0; i < count; ++i) {
    Rng rng(seed * 7919ULL + std::uint64_t(i) * 104729ULL + 17);
    GridMap m = style == MapStyle::kMaze ? detail::carve_maze(size, rng) : detail::build_rooms(size, rng);
    const auto free = m.free_mask().cells();
    const Cell start = free[rng.below(free.size())];
    const auto dist = bfs_distances(m.free_mask(), {start});
    int max_d = 0;
    for (const Cell& c : free) max_d = std::max(max_d, dist[std::size_t(c.y) * size + c.x]);
    std::vector<Cell> far;
    for (const Cell& c : free)
      if (dist[std::size_t(c.y) * size + c.x] * 2 >= max_d && !(c == start)) far.push_back(c);
    const Cell target = far[rng.below(far.size())];

    std::vector<std::string> vocab(kLabelVocabulary.begin(), kLabelVocabulary.end());
    rng.shuffle(vocab);
    m.set_label(target, vocab[0]);
    for (int d = 1; d <= 2; ++d) {
      for (int tries = 0; tries < 100; ++tries) {
        const Cell c = free[rng.below(free.size())];
        if (c == start || m.label(c)) continue;
        m.set_label(c, vocab[std::size_t(d)]);
        break;
      }
    }

    GeneratedMap g;
    char name[64];
    std::snprintf(name, sizeof name, "%s_%03d", style == MapStyle::kMaze ? "maze" : "rooms", i);
    g.name = name;
    g.map = std::move(m);
    g.question.question_id = g.name + "_q0";
    g.question.category = kCategories[std::size_t(i) % kCategories.size()];
    g.question.target_label = vocab[0];
    g.question.text = detail::question_text(g.question.category, vocab[0]);
    g.question.map_path = g.name + ".map";
    g.question.start = start;
    g.question.ground_truth = "the " + vocab[0] + " at cell (" + std::to_string(target.x) + ", " +
                              std::to_string(target.y) + ")";
    out.push_back(std::move(g));
  }
  return out;
}

/// Writes "<name>.map" per map and a questions.json into `dir`.
inline void write_corpus(const std::vector<GeneratedMap>& maps, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json qs = nlohmann::json::array();
  for (const auto& g : maps) {
    std::ofstream out(std::filesystem::path(dir) / (g.name + ".map"), std::ios::binary);
    out << format_map(g.map);
    qs.push_back(to_json(g.question));
  }
  std::ofstream q(std::filesystem::path(dir) / "questions.json", std::ios::binary);
  q << nlohmann::json{{"questions", qs}}.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Ablation

struct Toggle {
  std::string name;
  bool replay{true};
  bool working_memory{true};
  bool hierarchical{true};
};

/// "full", or any concatenation of "-replay", "-wm", "-hierarchy".
inline Toggle parse_toggle(const std::string& spec) {
  Toggle t{spec};
  if (spec == "full") return t;
  if (spec.empty()) throw Error(ErrorCode::kConfig, "empty ablation toggle");
  std::string rest = spec;
  while (!rest.empty()) {
    bool matched = false;
    for (auto [tok, flag] : {std::pair<const char*, bool*>{"-replay", &t.replay}, {"-wm", &t.working_memory},
                             {"-hierarchy", &t.hierarchical}}) {
      const std::string s = tok;
      if (rest.rfind(s, 0) == 0) {
        *flag = false;
        rest = rest.substr(s.size());
        matched = true;
        break;
      }
    }
    if (!matched) throw Error(ErrorCode::kConfig, "unknown ablation toggle '" + spec + "'");
  }
  return t;
}

struct AblationRow {
  Toggle toggle;
  MetricsReport report;
};

/// Runs the same episodes under each toggle set. Disabling the hierarchy
/// substitutes the listwise policy.
inline std::vector<AblationRow> ablate(const RunConfig& config, const std::vector<std::string>& toggles,
                                       const std::vector<EpisodeSpec>& episodes, const LibraryIndex* library,
                                       const Backends& backends) {
  if (toggles.size() < 2) throw Error(ErrorCode::kConfig, "ablation needs at least two toggle sets");
  if (episodes.empty()) throw Error(ErrorCode::kConfig, "ablation needs at least one episode");
  std::vector<AblationRow> rows;
  for (const auto& spec : toggles) {
    const Toggle t = parse_toggle(spec);
    RunConfig c = config;
    c.replay = t.replay;
    c.working_memory = t.working_memory;
    if (!t.hierarchical && c.policy == PolicyKind::kHierarchical) c.policy = PolicyKind::kListwise;
    std::vector<EpisodeResult> results;
    for (const auto& e : episodes) results.push_back(run_episode(c, e.map, e.question, library, backends).result);
    rows.push_back({t, make_report(results)});
  }
  return rows;
}

inline std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  auto pct = [](double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%6.1f", v);
    return std::string(buf);
  };
  os << "toggle               replay  wm  hier  llm_match  llm_match_x_spl     spl  success\n";
  for (const auto& r : rows) {
    char name[24];
    std::snprintf(name, sizeof name, "%-20s", r.toggle.name.c_str());
    const auto& o = r.report.overall;
    os << name << ' ' << (r.toggle.replay ? "   yes" : "    no") << (r.toggle.working_memory ? " yes" : "  no")
       << (r.toggle.hierarchical ? "   yes" : "    no") << "     " << (o.llm_match ? pct(*o.llm_match) : "     -")
       << "           " << pct(o.llm_match_x_spl) << "  " << pct(o.spl) << "   " << pct(o.success) << '\n';
  }
  return os.str();
}

}  // namespace reexplore
