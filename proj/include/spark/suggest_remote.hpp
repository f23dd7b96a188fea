#pragma once

#include <chrono>
#include <cstdlib>
#include <optional>
#include <regex>
#include <string>

#include <httplib.h>

#include "spark/suggest.hpp"

namespace spark {

/// Posts the prompt text to an HTTP endpoint and expects the contract object back.
class RemoteProvider : public SuggestionProvider {
 public:
  RemoteProvider(std::string url, std::string key, std::chrono::seconds timeout = std::chrono::seconds(30))
      : url_(std::move(url)), key_(std::move(key)), timeout_(timeout) {}

  /// From SPARK_SUGGEST_URL / SPARK_SUGGEST_KEY; nullopt when no URL is configured.
  static std::optional<RemoteProvider> from_env(std::chrono::seconds timeout = std::chrono::seconds(30)) {
    const char* url = std::getenv("SPARK_SUGGEST_URL");
    if (!url || !*url) return std::nullopt;
    const char* key = std::getenv("SPARK_SUGGEST_KEY");
    return RemoteProvider(url, key ? key : "", timeout);
  }

  std::string name() const override { return "remote"; }

  SuggestionResult propose(const SuggestionRequest& request) override {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url_, m, url_re)) throw ProviderError("malformed provider URL '" + url_ + "'");
    const std::string base = m[1].str();
    const std::string path = m[2].matched ? m[2].str() : "/";

    httplib::Client client(base);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!key_.empty()) headers.emplace("Authorization", "Bearer " + key_);

    const auto prompt = build_suggestion_prompt(request.description, request.reference);
    auto res = client.Post(path, headers, prompt, "text/plain; charset=utf-8");
    if (!res) throw ProviderError("provider request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw ProviderError("provider answered HTTP " + std::to_string(res->status));
    return parse_provider_reply(res->body);
  }

 private:
  std::string url_;
  std::string key_;
  std::chrono::seconds timeout_;
};

}  // namespace spark
