#pragma once

// Text-generation client contract and in-process mocks.

#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "reexplore/core.hpp"

namespace reexplore {

struct GenParams {
  double temperature{0.7};
  int max_tokens{4096};
  double top_p{0.95};
};

class TextGenClient {
 public:
  virtual ~TextGenClient() = default;
  virtual std::string generate(const std::string& prompt, const GenParams& params) = 0;
};

/// Scripted mock. Keyword rules are checked first, in file order: the first
/// rule whose `contains` text occurs in the prompt answers. Otherwise the next
/// entry of the ordered response list is returned (the last entry repeats
/// once the list is exhausted), and finally `fallback`. A mock with rules and
/// no ordered list is a pure function of the prompt.
///
/// Script file (JSON):
///   {"rules": [{"contains": "CVF 0", "response": "CVF 0"}],
///    "responses": ["BVF 1", "CVF 0"],
///    "default": "BVF 0"}
class MockGen : public TextGenClient {
 public:
  struct Rule {
    std::string contains;
    std::string response;
  };

  MockGen() = default;
  explicit MockGen(std::vector<std::string> responses) : responses_(std::move(responses)) {}
  MockGen(std::vector<Rule> rules, std::string fallback) : rules_(std::move(rules)), fallback_(std::move(fallback)) {}
  MockGen(MockGen&& o) noexcept
      : rules_(std::move(o.rules_)), responses_(std::move(o.responses_)), fallback_(std::move(o.fallback_)), next_(o.next_) {}

  static MockGen from_json(const nlohmann::json& j) {
    MockGen m;
    if (!j.is_object()) throw Error(ErrorCode::kConfig, "mock script must be a JSON object");
    if (j.contains("rules"))
      for (const auto& r : j.at("rules"))
        m.rules_.push_back({r.at("contains").get<std::string>(), r.at("response").get<std::string>()});
    if (j.contains("responses")) m.responses_ = j.at("responses").get<std::vector<std::string>>();
    if (j.contains("default")) m.fallback_ = j.at("default").get<std::string>();
    return m;
  }

  static MockGen from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kConfig, "cannot open mock script " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kConfig, "bad mock script " + path + ": " + e.what());
    }
  }

  std::string generate(const std::string& prompt, const GenParams&) override {
    for (const auto& r : rules_)
      if (prompt.find(r.contains) != std::string::npos) return r.response;
    std::lock_guard lock(mu_);
    if (!responses_.empty()) {
      const std::string& out = responses_[std::min(next_, responses_.size() - 1)];
      ++next_;
      return out;
    }
    return fallback_;
  }

 private:
  std::vector<Rule> rules_;
  std::vector<std::string> responses_;
  std::string fallback_;
  std::size_t next_{0};
  std::mutex mu_;
};

/// Mock backed by a callable.
class FunctionGen : public TextGenClient {
 public:
  using Fn = std::function<std::string(const std::string&, const GenParams&)>;
  explicit FunctionGen(Fn fn) : fn_(std::move(fn)) {}
  std::string generate(const std::string& prompt, const GenParams& params) override { return fn_(prompt, params); }

 private:
  Fn fn_;
};

/// Records every prompt passed to the wrapped client.
class RecordingClient : public TextGenClient {
 public:
  explicit RecordingClient(TextGenClient& inner) : inner_(inner) {}

  std::string generate(const std::string& prompt, const GenParams& params) override {
    prompts_.push_back(prompt);
    return inner_.generate(prompt, params);
  }

  const std::vector<std::string>& prompts() const { return prompts_; }
  std::size_t calls() const { return prompts_.size(); }

 private:
  TextGenClient& inner_;
  std::vector<std::string> prompts_;
};

}  // namespace reexplore
