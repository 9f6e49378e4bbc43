#pragma once

#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "idiff/codec.hpp"
#include "idiff/rationale.hpp"
#include "idiff/remote.hpp"

namespace idiff {

inline constexpr const char* kApiTokenEnv = "IDIFF_API_TOKEN";

struct EndpointConfig {
  std::string base_url;  // e.g. http://localhost:8000/v1; requests go to <base_url>/chat/completions
  std::string model_name = "qwen3-vl-8b-instruct";
  double timeout_seconds = 60;
  int max_retries = 3;
  std::size_t max_in_flight = 4;
  std::optional<std::string> auth_token;
  double backoff_base_seconds = 0.5;
  // Decoding pass-through; omitted from the request when unset.
  std::optional<double> temperature;
  std::optional<int> max_tokens;

  void validate() const {
    if (base_url.empty()) throw std::invalid_argument("endpoint base_url is empty");
    if (!(timeout_seconds > 0)) throw std::invalid_argument("endpoint timeout must be > 0");
    if (max_in_flight < 1) throw std::invalid_argument("endpoint max_in_flight must be >= 1");
    if (max_retries < 0) throw std::invalid_argument("endpoint max_retries must be >= 0");
  }
};

/// Token from the config, else from IDIFF_API_TOKEN.
inline std::optional<std::string> resolve_auth_token(const EndpointConfig& c) {
  if (c.auth_token) return c.auth_token;
  if (const char* env = std::getenv(kApiTokenEnv); env && *env) return std::string(env);
  return std::nullopt;
}

/// Chat-completions request: a system message and one user message with text plus four PNG image parts.
inline nlohmann::json chat_request_json(const EndpointConfig& c, const PromptBundle& b) {
  nlohmann::json content = nlohmann::json::array();
  content.push_back({{"type", "text"}, {"text", b.user_text}});
  for (const auto& img : b.images) {
    content.push_back(
        {{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + base64_encode(encode_png(img))}}}});
  }
  nlohmann::json req = {{"model", c.model_name},
                        {"messages",
                         {{{"role", "system"}, {"content", b.system_text}}, {{"role", "user"}, {"content", content}}}}};
  if (c.temperature) req["temperature"] = *c.temperature;
  if (c.max_tokens) req["max_tokens"] = *c.max_tokens;
  return req;
}

inline std::string decode_chat_response(const std::string& body, const std::string& sample_id) {
  using remote::ErrorKind;
  try {
    const auto doc = nlohmann::json::parse(body);
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw std::runtime_error("message content is not a string");
    return content.get<std::string>();
  } catch (const std::exception& e) {
    throw remote::RemoteError(ErrorKind::SchemaMismatch, sample_id, std::string("unexpected completion payload: ") + e.what());
  }
}

struct BatchItem {
  std::string id;
  remote::Outcome<std::string> result;
};

class MllmClient {
 public:
  explicit MllmClient(EndpointConfig config, remote::Transport transport = {}, remote::RetryPolicy policy = {})
      : config_(std::move(config)), policy_(std::move(policy)) {
    config_.validate();
    const auto url = remote::split_url(config_.base_url);
    path_ = (url.path == "/" ? std::string() : url.path) + "/chat/completions";
    transport_ = transport ? std::move(transport) : remote::make_http_transport(url.origin, config_.timeout_seconds);
    policy_.max_retries = config_.max_retries;
    policy_.backoff_base_seconds = config_.backoff_base_seconds;
    token_ = resolve_auth_token(config_);
  }

  /// Raw completion text for one prompt.
  std::string chat_complete(const PromptBundle& bundle) const {
    remote::HttpRequest req{path_, chat_request_json(config_, bundle).dump(), {}};
    if (token_) req.headers.emplace_back("Authorization", "Bearer " + *token_);
    return remote::send_with_retry(transport_, req, policy_, bundle.sample_id,
                                   [&](const std::string& body) { return decode_chat_response(body, bundle.sample_id); });
  }

  /// Completes every bundle with at most max_in_flight requests outstanding; output order = input order.
  std::vector<BatchItem> batch_complete(const std::vector<PromptBundle>& bundles) const {
    auto outcomes = remote::bounded_map(
        bundles, config_.max_in_flight, [this](const PromptBundle& b) { return chat_complete(b); },
        [](const PromptBundle& b) { return b.sample_id; });
    std::vector<BatchItem> out;
    out.reserve(bundles.size());
    for (std::size_t i = 0; i < bundles.size(); ++i) out.push_back({bundles[i].sample_id, std::move(outcomes[i])});
    return out;
  }

  const EndpointConfig& config() const noexcept { return config_; }

 private:
  EndpointConfig config_;
  std::string path_;
  remote::Transport transport_;
  remote::RetryPolicy policy_;
  std::optional<std::string> token_;
};

}  // namespace idiff
