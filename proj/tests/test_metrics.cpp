#include <gtest/gtest.h>

#include "reexplore/metrics.hpp"

using namespace reexplore;

namespace {

EpisodeResult item(int g, std::optional<int> p, bool valid, std::optional<int> s, int b = 1,
                   const std::string& cat = "object localization") {
  EpisodeResult r;
  r.question_id = "q" + std::to_string(g) + (p ? std::to_string(*p) : "x");
  r.category = cat;
  r.oracle_length = g;
  r.executed_length = p;
  if (p) r.answer = "answer";
  r.valid = valid;
  r.judge_score = s;
  r.fallback_score = b;
  return r;
}

}  // namespace

TEST(Spl, WorkedExamples) {
  EXPECT_DOUBLE_EQ(spl(4, 4), 1.0);
  EXPECT_DOUBLE_EQ(spl(4, std::nullopt), 0.0);
  EXPECT_DOUBLE_EQ(spl(2, 8), 0.25);
  EXPECT_DOUBLE_EQ(spl(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(spl(0, 5), 0.0);
  EXPECT_THROW(spl(-1, 3), Error);
  EXPECT_THROW(spl(1, -3), Error);
}

TEST(Spl, InvalidResultScoresZero) { EXPECT_DOUBLE_EQ(spl(item(3, 3, false, std::nullopt)), 0.0); }

TEST(Spl, Properties) {
  for (int g = 0; g <= 30; ++g) {
    double prev = 2.0;
    for (int p = 0; p <= 60; ++p) {
      const double v = spl(g, p);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      EXPECT_EQ(v == 1.0, p <= g);
      if (p >= g) {
        EXPECT_LE(v, prev);
        if (p > g && g > 0) {
          EXPECT_LT(v, prev);
        }
        prev = v;
      }
    }
  }
}

TEST(SuccessRate, Examples) {
  EXPECT_DOUBLE_EQ(success_rate({item(1, 1, true, 5), item(1, 1, false, 5), item(1, std::nullopt, false, {}),
                                 item(1, std::nullopt, false, {})}),
                   25.0);
  EXPECT_DOUBLE_EQ(success_rate({item(1, 1, true, 5), item(2, 2, true, 5)}), 100.0);
  EXPECT_DOUBLE_EQ(success_rate({item(1, std::nullopt, false, {})}), 0.0);
  EXPECT_THROW(success_rate({}), Error);
}

TEST(MapScore, Examples) {
  EXPECT_EQ(map_score(1), 0.0);
  EXPECT_EQ(map_score(3), 50.0);
  EXPECT_EQ(map_score(5), 100.0);
  EXPECT_DOUBLE_EQ(map_score(2), 25.0);
  EXPECT_THROW(map_score(0.5), Error);
  EXPECT_THROW(map_score(6), Error);
  EXPECT_THROW(map_score(std::nan("")), Error);
}

TEST(LlmMatch, Examples) {
  EXPECT_DOUBLE_EQ(llm_match({item(1, 1, true, 5), item(1, 1, true, 1)}), 50.0);
  EXPECT_DOUBLE_EQ(llm_match({item(1, 1, true, 4)}), 75.0);
  // Invalid or ungraded items are not eligible.
  EXPECT_DOUBLE_EQ(llm_match({item(1, 1, true, 4), item(1, 1, false, 1), item(1, 1, true, std::nullopt, 4)}), 75.0);
  try {
    llm_match({item(1, 1, true, std::nullopt, 4)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefined);
  }
}

TEST(LlmMatchXSpl, Examples) {
  EXPECT_DOUBLE_EQ(llm_match_x_spl({item(3, 3, true, 5)}), 100.0);
  EXPECT_DOUBLE_EQ(llm_match_x_spl({item(4, 8, true, 5), item(2, 2, true, 3)}), 50.0);
  EXPECT_DOUBLE_EQ(llm_match_x_spl({item(2, 2, true, std::nullopt, 1)}), 0.0);
  // Fallback b=4 with SPL 1 counts 75; no-answer item counts 0.
  EXPECT_DOUBLE_EQ(llm_match_x_spl({item(2, 2, true, std::nullopt, 4), item(5, std::nullopt, false, {}, 1)}), 37.5);
  EXPECT_THROW(llm_match_x_spl({}), Error);
}

TEST(FallbackScore, Rules) {
  EXPECT_EQ(fallback_score(std::nullopt, "sofa"), 1);
  EXPECT_EQ(fallback_score(std::string("   "), "sofa"), 1);
  EXPECT_EQ(fallback_score(std::string("it is near the sofa"), "sofa"), 4);
  EXPECT_EQ(fallback_score(std::string("unknown"), "sofa"), 2);
  EXPECT_EQ(fallback_score(std::string("The Sofa is at cell (3, 4)."), "sofa"), 4);
  EXPECT_EQ(fallback_score(std::string("sofabed"), "sofa"), 2);
  EXPECT_EQ(fallback_score(std::string("the coffee table is here"), "coffee table"), 4);
  EXPECT_EQ(fallback_score(std::string("the table"), "coffee table"), 2);
}

TEST(GradeAnswer, ScriptedScore) {
  MockGen inner(std::vector<std::string>{"5"});
  RecordingClient judge(inner);
  EXPECT_EQ(grade_answer("Where is the sofa?", "living room", "in the lounge", {"lounge", "den"}, judge), 5);
  const std::string& p = judge.prompts().at(0);
  for (const char* s : {"Where is the sofa?", "living room", "in the lounge", "- lounge", "- den"})
    EXPECT_NE(p.find(s), std::string::npos) << s;
}

TEST(GradeAnswer, RetryOnceThenUndefined) {
  {
    MockGen inner(std::vector<std::string>{"I think it is decent.", "Score: 3"});
    RecordingClient judge(inner);
    EXPECT_EQ(grade_answer("q", "a", "b", {}, judge), 3);
    EXPECT_EQ(judge.calls(), 2u);
  }
  {
    MockGen inner(std::vector<std::string>{"prose only"});
    RecordingClient judge(inner);
    EXPECT_EQ(grade_answer("q", "a", "b", {}, judge), std::nullopt);
    EXPECT_EQ(judge.calls(), 2u);
  }
  {
    FunctionGen judge([](const std::string&, const GenParams&) -> std::string { throw ClientError("down"); });
    EXPECT_EQ(grade_answer("q", "a", "b", {}, judge), std::nullopt);
  }
}

TEST(Report, PerCategoryAndRanges) {
  const std::vector<EpisodeResult> rs = {item(4, 4, true, 5, 4, "counting"), item(2, 8, true, 3, 4, "counting"),
                                         item(3, std::nullopt, false, {}, 1, "spatial understanding")};
  const MetricsReport rep = make_report(rs);
  EXPECT_NEAR(rep.overall.success, 200.0 / 3.0, 1e-12);
  EXPECT_NEAR(rep.overall.spl, 100.0 * 1.25 / 3.0, 1e-12);
  ASSERT_TRUE(rep.overall.llm_match);
  EXPECT_DOUBLE_EQ(*rep.overall.llm_match, 75.0);
  EXPECT_NEAR(rep.overall.llm_match_x_spl, (100.0 + 50.0 * 0.25) / 3.0, 1e-12);
  ASSERT_EQ(rep.per_category.size(), 2u);
  EXPECT_FALSE(rep.per_category.at("spatial understanding").llm_match.has_value());
  EXPECT_DOUBLE_EQ(rep.per_category.at("counting").success, 100.0);
  const auto j = to_json(rep);
  EXPECT_TRUE(j["per_category"]["spatial understanding"]["llm_match"].is_null());
  for (const auto& [name, m] : rep.per_category) {
    for (double v : {m.success, m.spl, m.llm_match_x_spl}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 100.0);
    }
  }
}

TEST(Report, Deterministic) {
  const std::vector<EpisodeResult> rs = {item(4, 6, true, 2, 2, "a"), item(1, 1, true, std::nullopt, 4, "b")};
  EXPECT_EQ(to_json(make_report(rs)).dump(2), to_json(make_report(rs)).dump(2));
}

TEST(Report, ItemJsonRoundTrip) {
  for (const auto& r : {item(4, 6, true, 2, 2, "a"), item(3, std::nullopt, false, {}, 1, "b")}) {
    const EpisodeResult back = episode_result_from_json(to_json(r));
    EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
  }
}
