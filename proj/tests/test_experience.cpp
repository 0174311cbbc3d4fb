#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"

using namespace reexplore;
using namespace reexplore::fixtures;

namespace {

TrajectoryLog log_of(int steps) {
  TrajectoryLog log;
  log.question = "Where is the lamp?";
  for (int t = 0; t < steps; ++t) log.steps.push_back({t, "step " + std::to_string(t), 0.0, {t, 0}, {}});
  return log;
}

const char* kWellFormed =
    "REFLECTION:\n"
    "Step 0 (Task Understanding): Find the lamp. Success means standing next to it.\n"
    "Step 1 (Trajectory): The agent went north.\nIt then turned east.\n"
    "Step 2 (Env-Object Associations): Lamps sit in living rooms.\n"
    "Step 3 (Strategy x Question Type + Directional Priors): Prefer open rooms.\n"
    "Step 4 (Anti-patterns): Avoid dead-end corridors.\n"
    "ABSTRACTION:\n"
    "Head for wide rooms first. Skip narrow corridors.\n";

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "reexplore_test_experience";
  std::filesystem::create_directories(dir);
  return dir / name;
}

// Removes the line(s) belonging to Step `k` from a format_reflection document.
std::string delete_block(const std::string& doc, int k) {
  std::istringstream in(doc);
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind("Step " + std::to_string(k) + " ", 0) != 0) out += line + '\n';
  return out;
}

}  // namespace

TEST(Chunk, RemainderKept) {
  const TrajectoryLog log = log_of(25);
  const auto chunks = chunk_trajectory(log);
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[0].size(), 10u);
  EXPECT_EQ(chunks[1].size(), 10u);
  EXPECT_EQ(chunks[2].size(), 5u);
  EXPECT_EQ(chunks[2].front().t, 20);
}

TEST(Chunk, ExactAndEmpty) {
  const TrajectoryLog ten = log_of(10), none = log_of(0);
  ASSERT_EQ(chunk_trajectory(ten).size(), 1u);
  EXPECT_EQ(chunk_trajectory(ten)[0].size(), 10u);
  EXPECT_TRUE(chunk_trajectory(none).empty());
  EXPECT_THROW(chunk_trajectory(ten, 0), Error);
}

TEST(Chunk, PartitionProperty) {
  for (int n = 0; n < 60; ++n)
    for (std::size_t len : {1u, 3u, 10u, 17u}) {
      const TrajectoryLog log = log_of(n);
      int expect_t = 0;
      for (const auto& c : chunk_trajectory(log, len)) {
        EXPECT_LE(c.size(), len);
        EXPECT_GE(c.size(), 1u);
        for (const auto& s : c) EXPECT_EQ(s.t, expect_t++);
      }
      EXPECT_EQ(expect_t, n);
    }
}

TEST(Verbalize, ScriptedCaption) {
  const TrajectoryLog log = log_of(3);
  MockGen inner(std::vector<std::string>{"The agent walked along a corridor."});
  RecordingClient client(inner);
  EXPECT_EQ(verbalize_chunk(chunk_trajectory(log)[0], log.question, Outcome::kPass, client),
            "The agent walked along a corridor.");
  const std::string& p = client.prompts().at(0);
  EXPECT_NE(p.find("Where is the lamp?"), std::string::npos);
  EXPECT_NE(p.find("PASS"), std::string::npos);
  EXPECT_LT(p.find("step 0"), p.find("step 2"));
}

TEST(Verbalize, EmptyChunkRejected) {
  MockGen client;
  EXPECT_THROW(verbalize_chunk({}, "q", Outcome::kFail, client), Error);
}

TEST(Verbalize, ChunksInOrder) {
  const TrajectoryLog log = log_of(15);
  MockGen client(std::vector<std::string>{"first", "second"});
  std::vector<std::string> caps;
  for (const auto& c : chunk_trajectory(log)) caps.push_back(verbalize_chunk(c, log.question, Outcome::kFail, client));
  EXPECT_EQ(caps, (std::vector<std::string>{"first", "second"}));
}

TEST(Summarize, OrderPreservedAndEmptyRejected) {
  MockGen inner(std::vector<std::string>{"merged"});
  RecordingClient client(inner);
  EXPECT_EQ(summarize_trajectory({"alpha part", "beta part"}, client), "merged");
  const std::string& p = client.prompts().at(0);
  EXPECT_LT(p.find("alpha part"), p.find("beta part"));
  EXPECT_THROW(summarize_trajectory({}, client), Error);
}

TEST(Reflection, WellFormedParses) {
  MockGen client(std::vector<std::string>{kWellFormed});
  const Abstraction a = reflect_and_abstract("caption", "Where is the lamp?", Outcome::kPass, client);
  EXPECT_EQ(a.reflection_blocks[0], "Find the lamp. Success means standing next to it.");
  EXPECT_EQ(a.reflection_blocks[1], "The agent went north. It then turned east.");
  EXPECT_EQ(a.reflection_blocks[4], "Avoid dead-end corridors.");
  EXPECT_EQ(a.abstraction_text, "Head for wide rooms first. Skip narrow corridors.");
  EXPECT_EQ(a.source_question, "Where is the lamp?");
  EXPECT_EQ(a.source_outcome, Outcome::kPass);
}

TEST(Reflection, PromptCarriesInputsAndLabels) {
  MockGen inner(std::vector<std::string>{kWellFormed});
  RecordingClient client(inner);
  reflect_and_abstract("went north then east", "Where is the lamp?", Outcome::kFail, client);
  const std::string& p = client.prompts().at(0);
  for (const char* s : {"went north then east", "Where is the lamp?", "FAIL", "REFLECTION", "ABSTRACTION", "Step 0",
                        "Step 4"})
    EXPECT_NE(p.find(s), std::string::npos) << s;
}

TEST(Reflection, MissingStep3) {
  const std::string doc = delete_block(kWellFormed, 3);
  try {
    parse_reflection(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedReflection);
  }
}

TEST(Reflection, OutOfOrder) {
  std::string doc = kWellFormed;
  const auto s1 = doc.find("Step 1"), s2 = doc.find("Step 2"), s3 = doc.find("Step 3");
  // Swap the Step 1 and Step 2 lines.
  const std::string b1 = doc.substr(s1, s2 - s1), b2 = doc.substr(s2, s3 - s2);
  doc = doc.substr(0, s1) + b2 + b1 + doc.substr(s3);
  EXPECT_THROW(parse_reflection(doc), Error);
}

TEST(Reflection, OtherMalformations) {
  const std::string good = kWellFormed;
  const std::vector<std::string> bad = {
      "",
      good.substr(0, good.find("ABSTRACTION:")),                      // no abstraction
      good.substr(good.find("Step 0")),                               // no REFLECTION label
      good + "Step 5 (Extra): more.\n",                               // step inside abstraction
      good.substr(0, good.find("ABSTRACTION:")) + "ABSTRACTION:\n",   // empty paragraph
      "REFLECTION:\nStep 0 (Task Understanding):\nStep 1: a\nStep 2: b\nStep 3: c\nStep 4: d\nABSTRACTION:\np\n",
      good + "ABSTRACTION:\nagain\n",
  };
  for (const auto& d : bad) EXPECT_THROW(parse_reflection(d), Error) << d;
}

TEST(Reflection, PreambleAndMarkupTolerated) {
  const std::string doc = std::string("Sure, here is my analysis.\n\n**REFLECTION:**\n") +
                          std::string(kWellFormed).substr(std::string("REFLECTION:\n").size());
  EXPECT_EQ(parse_reflection(doc).abstraction_text, "Head for wide rooms first. Skip narrow corridors.");
}

TEST(Reflection, FormatRoundTripFuzz) {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const Abstraction a = random_abstraction(rng);
    const Abstraction b = parse_reflection(format_reflection(a));
    EXPECT_EQ(b.reflection_blocks, a.reflection_blocks);
    EXPECT_EQ(b.abstraction_text, a.abstraction_text);
    for (int k = 0; k < 5; ++k) EXPECT_THROW(parse_reflection(delete_block(format_reflection(a), k)), Error);
  }
}

TEST(ScoreAbstraction, Means) {
  Abstraction a;
  a.abstraction_text = "x";
  auto score = [&](const std::string& reply) {
    MockGen judge(std::vector<std::string>{reply});
    return score_abstraction(a, judge).overall;
  };
  EXPECT_DOUBLE_EQ(score("Generality: 5\nRelevance: 5\nConciseness: 5\nActionability: 5"), 5.0);
  EXPECT_DOUBLE_EQ(score("Generality: 1\nRelevance: 1\nConciseness: 1\nActionability: 1"), 1.0);
  EXPECT_DOUBLE_EQ(score("Generality: 5 (broad)\nRelevance: 3\n**Conciseness**: 4\nActionability = 4"), 4.0);
}

TEST(ScoreAbstraction, Unparseable) {
  Abstraction a;
  MockGen judge(std::vector<std::string>{"Generality: 5\nRelevance: 9"});
  try {
    score_abstraction(a, judge);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnparseableJudge);
  }
}

TEST(Library, SaveLoadIdentity) {
  Rng rng(3);
  const ExperienceLibrary lib = random_library(rng, 12);
  const auto path = temp_file("lib.jsonl");
  lib.save(path.string());
  EXPECT_EQ(ExperienceLibrary::load(path.string()), lib);
}

TEST(Library, DuplicateId) {
  ExperienceLibrary lib;
  LibraryEntry e;
  e.trajectory_id = "t";
  lib.add(e);
  try {
    lib.add(e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kDuplicateId);
  }
  EXPECT_EQ(lib.size(), 1u);
}

TEST(Library, AutoIdsAreFresh) {
  ExperienceLibrary lib;
  LibraryEntry named;
  named.trajectory_id = "traj-0001";
  lib.add(named);
  const std::string a = lib.add({}), b = lib.add({});
  EXPECT_NE(a, b);
  EXPECT_NE(a, "traj-0001");
  EXPECT_NE(b, "traj-0001");
}

TEST(Library, EmptyFile) {
  const auto path = temp_file("empty.jsonl");
  std::ofstream(path).close();
  EXPECT_TRUE(ExperienceLibrary::load(path.string()).empty());
}

TEST(Library, MalformedFile) {
  const auto path = temp_file("bad.jsonl");
  std::ofstream(path) << "{\"trajectory_id\": \"x\"}\n";
  try {
    ExperienceLibrary::load(path.string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedLibrary);
  }
  EXPECT_THROW(ExperienceLibrary::from_jsonl("not json\n"), Error);
  EXPECT_THROW(ExperienceLibrary::load(temp_file("missing/none.jsonl").string()), Error);
}

TEST(Library, NonAsciiRoundTrip) {
  ExperienceLibrary lib;
  LibraryEntry e;
  e.question = "Où est la lampe du café?";
  e.abstraction.reflection_blocks = {"台所", "кухня", "naïve", "🪴", "ü"};
  e.abstraction.abstraction_text = "Überall suchen.";
  e.snapshots.push_back({0, 1.25, {"café", "台所"}, "view café\n"});
  lib.add(e);
  EXPECT_EQ(ExperienceLibrary::from_jsonl(lib.to_jsonl()), lib);
}
