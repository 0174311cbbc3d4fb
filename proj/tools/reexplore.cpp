// reexplore command-line harness.
//
//   reexplore gen-maps --seed 0 --count 20 --size 15 --style maze --out corpus/
//   reexplore build-experience --questions train/questions.json --textgen-script mock.json --out lib.jsonl
//   reexplore run --questions eval/questions.json --library lib.jsonl --textgen-script mock.json --out logs.jsonl
//   reexplore evaluate --questions eval/questions.json --library lib.jsonl --report report.json
//   reexplore ablate --questions eval/questions.json --toggles full,-replay,-wm,-hierarchy
//   reexplore dump-hierarchy --map corpus/maze_000.map --start 1,1 [--dump-layer frontier]
//
// Exit status: 0 success, 2 configuration error, 3 runtime fault.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "reexplore/reexplore.hpp"
#include "reexplore/remote.hpp"

using namespace reexplore;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFault = 3;

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::string policy, textgen_url, textgen_script, embedder_url, judge_url, judge_script, questions, library;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_steps;
  std::optional<bool> replay, working_memory;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "config file, JSON object or key=value lines");
  cmd->add_option("--set", c.sets, "override one setting, key=value (repeatable)");
  cmd->add_option("--policy", c.policy, "hierarchical, listwise, pointwise, pairwise or oracle");
  cmd->add_option("--seed", c.seed);
  cmd->add_option("--max-steps", c.max_steps);
  cmd->add_option("--replay", c.replay, "true or false");
  cmd->add_option("--working-memory", c.working_memory, "true or false");
  cmd->add_option("--textgen-url", c.textgen_url);
  cmd->add_option("--textgen-script", c.textgen_script, "MockGen script (JSON)");
  cmd->add_option("--embedder-url", c.embedder_url);
  cmd->add_option("--judge-url", c.judge_url);
  cmd->add_option("--judge-script", c.judge_script);
  cmd->add_option("--questions", c.questions);
  cmd->add_option("--library", c.library);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path);
  out << text;
}

// Config file first, then explicit flags, then --set overrides.
RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config_file.empty() ? RunConfig{} : parse_config(read_file(c.config_file));
  auto set = [&](const char* key, const nlohmann::json& v) { apply_setting(cfg, key, v); };
  if (!c.policy.empty()) set("policy", c.policy);
  if (c.seed) set("seed", *c.seed);
  if (c.max_steps) set("max_steps", *c.max_steps);
  if (c.replay) set("replay", *c.replay);
  if (c.working_memory) set("working_memory", *c.working_memory);
  if (!c.textgen_url.empty()) set("textgen_url", c.textgen_url);
  if (!c.textgen_script.empty()) set("textgen_script", c.textgen_script);
  if (!c.embedder_url.empty()) set("embedder_url", c.embedder_url);
  if (!c.judge_url.empty()) set("judge_url", c.judge_url);
  if (!c.judge_script.empty()) set("judge_script", c.judge_script);
  if (!c.questions.empty()) set("questions", c.questions);
  if (!c.library.empty()) set("library", c.library);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kConfig, "--set expects key=value, got '" + kv + "'");
    set(kv.substr(0, eq).c_str(), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

// Owns whichever clients the configuration asks for.
struct Clients {
  std::unique_ptr<TextGenClient> policy, judge;
  std::unique_ptr<Embedder> embedder;

  explicit Clients(const RunConfig& cfg) {
    policy = make_gen(cfg.textgen_url, cfg.textgen_script);
    judge = make_gen(cfg.judge_url, cfg.judge_script);
    if (!cfg.embedder_url.empty()) embedder = std::make_unique<HttpEmbedder>(cfg.embedder_url);
    else embedder = std::make_unique<MockEmbedder>(cfg.embed_dim);
  }

  Backends backends() const { return {policy.get(), embedder.get(), judge.get()}; }

 private:
  static std::unique_ptr<TextGenClient> make_gen(const std::string& url, const std::string& script) {
    if (!url.empty() && !script.empty()) throw Error(ErrorCode::kConfig, "give either a URL or a mock script, not both");
    if (!url.empty()) return std::make_unique<HttpTextGen>(url);
    if (!script.empty()) return std::make_unique<MockGen>(MockGen::from_file(script));
    return nullptr;
  }
};

// A map that does not load is a configuration problem, not a runtime fault.
GridMap load_map_config(const std::string& path) {
  try {
    return load_map_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, std::string(e.what()) + " (" + path + ")");
  }
}

std::vector<EpisodeSpec> load_episodes(const RunConfig& cfg) {
  if (cfg.questions_path.empty()) throw Error(ErrorCode::kConfig, "no questions file given (--questions)");
  std::vector<EpisodeSpec> out;
  for (const auto& q : load_questions(cfg.questions_path)) {
    if (q.map_path.empty()) throw Error(ErrorCode::kConfig, "question " + q.question_id + " names no map");
    GridMap map = load_map_config(q.map_path);
    if (map.cells_labeled(q.target_label).empty())
      throw Error(ErrorCode::kConfig, "target label '" + q.target_label + "' of " + q.question_id + " is not in its map");
    out.push_back({std::move(map), q});
  }
  return out;
}

struct LoadedLibrary {
  ExperienceLibrary library;
  std::optional<LibraryIndex> index;

  const LibraryIndex* get() const { return index ? &*index : nullptr; }
};

void load_library(const RunConfig& cfg, Embedder& embedder, LoadedLibrary& out) {
  if (cfg.library_path.empty() || !cfg.replay) return;
  try {
    out.library = ExperienceLibrary::load(cfg.library_path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  out.index = LibraryIndex::build(out.library, embedder);
}

bool faulted(const EpisodeLog& log) { return log.termination.rfind("runtime fault", 0) == 0; }

// ---------------------------------------------------------------------------

int cmd_gen_maps(std::uint64_t seed, int count, int size, const std::string& style, const std::string& out) {
  if (count < 1) throw Error(ErrorCode::kConfig, "--count must be at least 1");
  if (size < 7) throw Error(ErrorCode::kConfig, "--size must be at least 7");
  const auto maps = gen_maps(seed, count, size, parse_style(style));
  write_corpus(maps, out);
  std::cerr << "wrote " << maps.size() << " maps and questions.json to " << out << '\n';
  return 0;
}

int cmd_build_experience(const Common& common, const std::string& out) {
  const RunConfig cfg = resolve(common);
  Clients clients(cfg);
  if (!clients.policy) throw Error(ErrorCode::kConfig, "experience building needs a text-generation backend");
  const auto episodes = load_episodes(cfg);
  std::vector<std::string> warnings;
  TextGenClient* rollout = cfg.policy == PolicyKind::kOracle ? nullptr : clients.policy.get();
  const ExperienceLibrary lib = build_experience_set(cfg, episodes, {rollout, clients.policy.get()}, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  const std::string path = out.empty() ? cfg.library_path : out;
  if (path.empty()) throw Error(ErrorCode::kConfig, "no output library path (--out)");
  lib.save(path);
  std::cerr << "library of " << lib.size() << " entries written to " << path << '\n';
  return 0;
}

std::vector<EpisodeLog> run_all(const RunConfig& cfg, bool* any_fault) {
  Clients clients(cfg);
  const auto episodes = load_episodes(cfg);
  LoadedLibrary lib;
  load_library(cfg, *clients.embedder, lib);
  std::vector<EpisodeLog> logs;
  for (const auto& e : episodes) {
    logs.push_back(run_episode(cfg, e.map, e.question, lib.get(), clients.backends()));
    if (faulted(logs.back())) {
      *any_fault = true;
      std::cerr << e.question.question_id << ": " << logs.back().termination << '\n';
    }
  }
  return logs;
}

int cmd_run(const Common& common, const std::string& out) {
  const RunConfig cfg = resolve(common);
  bool fault = false;
  std::string text;
  for (const auto& log : run_all(cfg, &fault)) text += to_json(log).dump() + '\n';
  write_file(out, text);
  return fault ? kExitFault : 0;
}

int cmd_evaluate(const Common& common, const std::string& logs_path, const std::string& report_path) {
  std::vector<EpisodeResult> results;
  bool fault = false;
  if (!logs_path.empty()) {
    std::istringstream in(read_file(logs_path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        results.push_back(episode_result_from_json(nlohmann::json::parse(line).at("result")));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kConfig, "bad episode log line in " + logs_path + ": " + e.what());
      }
    }
  } else {
    for (const auto& log : run_all(resolve(common), &fault)) results.push_back(log.result);
  }
  if (results.empty()) throw Error(ErrorCode::kConfig, "no episodes to evaluate");
  write_file(report_path, to_json(make_report(results)).dump(2) + '\n');
  return fault ? kExitFault : 0;
}

int cmd_ablate(const Common& common, const std::vector<std::string>& toggles, const std::string& out) {
  const RunConfig cfg = resolve(common);
  for (const auto& t : toggles) parse_toggle(t);
  Clients clients(cfg);
  const auto episodes = load_episodes(cfg);
  LoadedLibrary lib;
  RunConfig lib_cfg = cfg;
  lib_cfg.replay = true;
  load_library(lib_cfg, *clients.embedder, lib);
  const auto rows = ablate(cfg, toggles, episodes, lib.get(), clients.backends());
  std::cout << format_ablation_table(rows);
  if (!out.empty()) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) j.push_back({{"toggle", r.toggle.name}, {"report", to_json(r.report)}});
    write_file(out, j.dump(2) + '\n');
  }
  return 0;
}

Cell parse_cell(const std::string& s) {
  int x = 0, y = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d,%d%c", &x, &y, &tail) != 2) throw Error(ErrorCode::kConfig, "expected x,y but got '" + s + "'");
  return {x, y};
}

int cmd_dump_hierarchy(const Common& common, const std::string& map_path, const std::string& start,
                       double heading_deg, const std::string& layer) {
  const RunConfig cfg = resolve(common);
  const GridMap map = load_map_config(map_path);
  const Cell agent = start.empty() ? detail::default_start(map) : parse_cell(start);
  if (!map.in_bounds(agent) || map.is_wall(agent)) throw Error(ErrorCode::kConfig, "start cell is not free");
  const AgentPose pose{agent, rad(heading_deg)};
  OccupancyMap occ(map.width(), map.height());
  occ.integrate(cast_rays(map, pose, kTwoPi, cfg.sensing.range_cells));
  occ.integrate(proximity_observation(map, pose));
  const auto frontiers = extract_frontiers(occ, agent, cfg.band);

  if (!layer.empty()) {
    CellMask mask(map.width(), map.height());
    if (layer == "seen") mask = occ.seen;
    else if (layer == "free") mask = occ.free;
    else if (layer == "occupied") mask = occ.occupied;
    else if (layer == "island") mask = reachable_island(occ, agent);
    else if (layer == "frontier")
      for (const auto& f : frontiers) mask.set(f.cell);
    else throw Error(ErrorCode::kConfig, "unknown layer '" + layer + "' (seen, free, occupied, island, frontier)");
    std::cout << dump_layer(mask);
    return 0;
  }
  const FrontierHierarchy h =
      build_hierarchy(frontier_cells(frontiers), pose, {cfg.seed * 1000003ULL, cfg.min_bvf_size, cfg.min_cvf_size});
  std::cout << dump_hierarchy(h);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frontier exploration with hierarchical selection and experience replay on grid worlds"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int count = 10, size = 15;
  std::string style = "rooms", out;
  auto* gen = app.add_subcommand("gen-maps", "generate a synthetic map corpus with questions.json");
  gen->add_option("--seed", seed);
  gen->add_option("--count", count);
  gen->add_option("--size", size);
  gen->add_option("--style", style, "rooms or maze");
  gen->add_option("--out", out, "output directory")->required();

  Common common;
  auto* build = app.add_subcommand("build-experience", "roll out training questions and write an experience library");
  add_common(build, common);
  build->add_option("--out", out, "library path (defaults to --library)");

  auto* run = app.add_subcommand("run", "run episodes and write one JSON episode log per line");
  add_common(run, common);
  run->add_option("--out", out, "log file, '-' for stdout");

  std::string logs, report = "-";
  auto* evaluate = app.add_subcommand("evaluate", "run episodes (or read logs) and write a metrics report");
  add_common(evaluate, common);
  evaluate->add_option("--logs", logs, "episode log file from 'run' instead of running");
  evaluate->add_option("--report", report, "report path, '-' for stdout");

  std::vector<std::string> toggles;
  auto* abl = app.add_subcommand("ablate", "compare toggle sets on the same questions");
  add_common(abl, common);
  abl->add_option("--toggles", toggles, "full or combinations of -replay, -wm, -hierarchy")->delimiter(',')->required();
  abl->add_option("--out", out, "JSON file for the per-toggle reports");

  std::string map_path, start, layer;
  double heading = 0.0;
  auto* dump = app.add_subcommand("dump-hierarchy", "print the frontier hierarchy seen from a start cell");
  add_common(dump, common);
  dump->add_option("--map", map_path)->required();
  dump->add_option("--start", start, "x,y (default: first free cell)");
  dump->add_option("--heading", heading, "degrees");
  dump->add_option("--dump-layer", layer, "seen, free, occupied, island or frontier");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_maps(seed, count, size, style, out);
    if (*build) return cmd_build_experience(common, out);
    if (*run) return cmd_run(common, out);
    if (*evaluate) return cmd_evaluate(common, logs, report);
    if (*abl) return cmd_ablate(common, toggles, out);
    if (*dump) return cmd_dump_hierarchy(common, map_path, start, heading, layer);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kConfig ? kExitConfig : kExitFault;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFault;
  }
  return 0;
}
