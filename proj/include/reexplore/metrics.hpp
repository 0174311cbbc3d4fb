#pragma once

// Success rate, SPL, LLM-Match and LLM-Match x SPL, with judge grading and a
// rule-based fallback score.

#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "reexplore/core.hpp"
#include "reexplore/retrieval.hpp"
#include "reexplore/textgen.hpp"

namespace reexplore {

struct EpisodeResult {
  std::string question_id;
  std::string category;
  int oracle_length{0};                  // G
  std::optional<int> executed_length;    // P; absent when no answer was produced
  std::optional<std::string> answer;
  bool valid{false};
  std::optional<int> judge_score;        // s, 1..5
  int fallback_score{1};                 // b, 1..5
};

/// G / max(G, P); 0 without an answer; 1 when G = P = 0.
inline double spl(int oracle_length, std::optional<int> executed_length) {
  if (oracle_length < 0 || (executed_length && *executed_length < 0))
    throw Error(ErrorCode::kInvalidArgument, "path lengths must be non-negative");
  if (!executed_length) return 0.0;
  const int denom = std::max(oracle_length, *executed_length);
  if (denom == 0) return 1.0;
  return double(oracle_length) / double(denom);
}

inline double spl(const EpisodeResult& r) { return r.valid ? spl(r.oracle_length, r.executed_length) : 0.0; }

/// Linear map of a 1..5 score onto 0..100.
inline double map_score(double s) {
  if (!(s >= 1.0 && s <= 5.0)) throw Error(ErrorCode::kInvalidArgument, "score outside [1, 5]");
  return 100.0 * (s - 1.0) / 4.0;
}

inline double success_rate(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw Error(ErrorCode::kInvalidArgument, "no results");
  std::size_t valid = 0;
  for (const auto& r : results) valid += r.valid ? 1 : 0;
  return 100.0 * double(valid) / double(results.size());
}

inline double mean_spl(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw Error(ErrorCode::kInvalidArgument, "no results");
  double s = 0.0;
  for (const auto& r : results) s += spl(r);
  return 100.0 * s / double(results.size());
}

/// Mean mapped judge score over answers that are valid and judge-graded.
/// Throws kUndefined when no answer qualifies.
inline double llm_match(const std::vector<EpisodeResult>& results) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : results)
    if (r.valid && r.judge_score) sum += map_score(*r.judge_score), ++n;
  if (n == 0) throw Error(ErrorCode::kUndefined, "no valid graded answers");
  return sum / double(n);
}

/// Mean over all questions of mapped(s, else b) x SPL.
inline double llm_match_x_spl(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw Error(ErrorCode::kInvalidArgument, "no results");
  double sum = 0.0;
  for (const auto& r : results) sum += map_score(r.judge_score ? *r.judge_score : r.fallback_score) * spl(r);
  return sum / double(results.size());
}

/// Rule-based format check: 1 for no answer, 4 when the answer names the
/// target label, 2 otherwise. Never 5 without a judge.
inline int fallback_score(const std::optional<std::string>& answer, const std::string& target_label) {
  if (!answer || detail::trim(*answer).empty()) return 1;
  const auto answer_words = MockEmbedder::words(*answer);
  const auto label_words = MockEmbedder::words(target_label);
  if (label_words.empty()) return 2;
  for (std::size_t i = 0; i + label_words.size() <= answer_words.size(); ++i)
    if (std::equal(label_words.begin(), label_words.end(), answer_words.begin() + std::ptrdiff_t(i))) return 4;
  return 2;
}

inline std::string grading_prompt(const std::string& question, const std::string& ground_truth,
                                  const std::string& prediction, const std::vector<std::string>& paraphrases) {
  std::ostringstream os;
  os << "You grade answers to embodied question-answering tasks. Compare the predicted answer with the ground truth "
        "and give a single integer score:\n"
     << "5 = fully correct and semantically equivalent\n"
     << "4 = correct with minor imprecision\n"
     << "3 = partially correct\n"
     << "2 = mostly incorrect but related\n"
     << "1 = unrelated or clearly wrong\n"
     << "Surface wording does not matter; meaning does.\n\n"
     << "Example: question \"What color is the sofa?\", ground truth \"blue\", prediction \"navy blue\" -> 5\n"
     << "Example: question \"Where is the mug?\", ground truth \"on the kitchen counter\", prediction \"in the "
        "bedroom\" -> 1\n\n"
     << "Question: " << question << '\n'
     << "Ground truth: " << ground_truth << '\n';
  if (!paraphrases.empty()) {
    os << "Equivalent phrasings of the ground truth:\n";
    for (const auto& p : paraphrases) os << "- " << p << '\n';
  }
  os << "Prediction: " << prediction << "\n\nReply with the score only.\n";
  return os.str();
}

/// First digit 1..5 in the judge's reply, retrying once; nullopt when both
/// replies are unusable.
inline std::optional<int> grade_answer(const std::string& question, const std::string& ground_truth,
                                       const std::string& prediction, const std::vector<std::string>& paraphrases,
                                       TextGenClient& judge, const GenParams& params = {}) {
  static const std::regex digit(R"(\b([1-5])\b)");
  const std::string prompt = grading_prompt(question, ground_truth, prediction, paraphrases);
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string reply;
    try {
      reply = judge.generate(prompt, params);
    } catch (const ClientError&) {
      continue;
    }
    std::smatch m;
    if (std::regex_search(reply, m, digit)) return std::stoi(m[1].str());
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Reports

struct MetricsSummary {
  double success{0.0};
  double spl{0.0};
  std::optional<double> llm_match;
  double llm_match_x_spl{0.0};
};

inline MetricsSummary summarize(const std::vector<EpisodeResult>& results) {
  MetricsSummary m;
  m.success = success_rate(results);
  m.spl = mean_spl(results);
  try {
    m.llm_match = llm_match(results);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUndefined) throw;
  }
  m.llm_match_x_spl = llm_match_x_spl(results);
  return m;
}

struct MetricsReport {
  MetricsSummary overall;
  std::map<std::string, MetricsSummary> per_category;
  std::vector<EpisodeResult> items;
};

inline MetricsReport make_report(const std::vector<EpisodeResult>& results) {
  MetricsReport rep;
  rep.overall = summarize(results);
  std::map<std::string, std::vector<EpisodeResult>> by_cat;
  for (const auto& r : results) by_cat[r.category.empty() ? "uncategorized" : r.category].push_back(r);
  for (const auto& [cat, rs] : by_cat) rep.per_category[cat] = summarize(rs);
  rep.items = results;
  return rep;
}

inline nlohmann::json to_json(const MetricsSummary& m) {
  nlohmann::json j = {{"success", m.success}, {"spl", m.spl}, {"llm_match_x_spl", m.llm_match_x_spl}};
  j["llm_match"] = m.llm_match ? nlohmann::json(*m.llm_match) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const EpisodeResult& r) {
  nlohmann::json j = {{"question_id", r.question_id},
                      {"category", r.category},
                      {"G", r.oracle_length},
                      {"valid", r.valid},
                      {"b", r.fallback_score},
                      {"spl", spl(r)}};
  j["P"] = r.executed_length ? nlohmann::json(*r.executed_length) : nlohmann::json(nullptr);
  j["answer"] = r.answer ? nlohmann::json(*r.answer) : nlohmann::json(nullptr);
  j["s"] = r.judge_score ? nlohmann::json(*r.judge_score) : nlohmann::json(nullptr);
  return j;
}

inline EpisodeResult episode_result_from_json(const nlohmann::json& j) {
  EpisodeResult r;
  r.question_id = j.at("question_id").get<std::string>();
  r.category = j.value("category", "");
  r.oracle_length = j.at("G").get<int>();
  if (j.contains("P") && !j.at("P").is_null()) r.executed_length = j.at("P").get<int>();
  if (j.contains("answer") && !j.at("answer").is_null()) r.answer = j.at("answer").get<std::string>();
  r.valid = j.at("valid").get<bool>();
  if (j.contains("s") && !j.at("s").is_null()) r.judge_score = j.at("s").get<int>();
  r.fallback_score = j.at("b").get<int>();
  return r;
}

inline nlohmann::json to_json(const MetricsReport& rep) {
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [k, v] : rep.per_category) cats[k] = to_json(v);
  nlohmann::json items = nlohmann::json::array();
  for (const auto& r : rep.items) items.push_back(to_json(r));
  return {{"overall", to_json(rep.overall)}, {"per_category", cats}, {"items", items}};
}

}  // namespace reexplore
