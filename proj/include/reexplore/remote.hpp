#pragma once

// JSON-over-HTTP clients for remote text generation and embedding services.

#include <memory>
#include <mutex>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "reexplore/retrieval.hpp"
#include "reexplore/textgen.hpp"

namespace reexplore {

namespace detail {

/// Splits "http://host:port/path" into the scheme+authority and the path.
inline std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::kConfig, "URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

inline nlohmann::json post_json(httplib::Client& client, std::mutex& mu, const std::string& path,
                                const nlohmann::json& body) {
  httplib::Result res;
  {
    std::lock_guard<std::mutex> lock(mu);
    res = client.Post(path, body.dump(), "application/json");
  }
  if (!res) throw ClientError("request to " + path + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw ClientError("request to " + path + " returned HTTP " + std::to_string(res->status));
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ClientError(std::string("unparseable response body: ") + e.what());
  }
}

}  // namespace detail

/// POST {prompt, temperature, max_tokens, top_p} -> {text}.
class HttpTextGen : public TextGenClient {
 public:
  explicit HttpTextGen(const std::string& url, int timeout_s = 120) {
    auto [base, path] = detail::split_url(url);
    client_ = std::make_unique<httplib::Client>(base);
    client_->set_read_timeout(timeout_s, 0);
    client_->set_connection_timeout(10, 0);
    path_ = path;
  }

  std::string generate(const std::string& prompt, const GenParams& params) override {
    const nlohmann::json body = {{"prompt", prompt},
                                 {"temperature", params.temperature},
                                 {"max_tokens", params.max_tokens},
                                 {"top_p", params.top_p}};
    const auto j = detail::post_json(*client_, mu_, path_, body);
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) throw ClientError("response lacks 'text'");
    return j["text"].get<std::string>();
  }

 private:
  std::unique_ptr<httplib::Client> client_;
  std::string path_;
  std::mutex mu_;
};

/// POST {kind: "snapshot" | "text", payload} -> {vector}. Vectors are
/// L2-normalized on arrival and must keep one dimension across calls.
class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(const std::string& url, int timeout_s = 60) {
    auto [base, path] = detail::split_url(url);
    client_ = std::make_unique<httplib::Client>(base);
    client_->set_read_timeout(timeout_s, 0);
    path_ = path;
  }

  Vector embed_snapshot(const Snapshot& s) override {
    return request({{"kind", "snapshot"},
                    {"payload",
                     {{"theta_rad", s.theta}, {"labels", s.visible_labels}, {"text_render", s.text_render}}}});
  }

  Vector embed_text(const std::string& text) override { return request({{"kind", "text"}, {"payload", text}}); }

 private:
  Vector request(const nlohmann::json& body) {
    const auto j = detail::post_json(*client_, mu_, path_, body);
    if (!j.is_object() || !j.contains("vector") || !j["vector"].is_array()) throw ClientError("response lacks 'vector'");
    Vector v;
    for (const auto& x : j["vector"]) {
      if (!x.is_number()) throw ClientError("non-numeric vector component");
      v.push_back(x.get<double>());
    }
    if (v.empty()) throw ClientError("empty embedding");
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (dim_ == 0) dim_ = v.size();
      if (v.size() != dim_) throw Error(ErrorCode::kDimensionMismatch, "embedding dimension changed");
    }
    normalize(v);
    return v;
  }

  std::unique_ptr<httplib::Client> client_;
  std::string path_;
  std::mutex mu_;
  std::size_t dim_{0};
};

}  // namespace reexplore
