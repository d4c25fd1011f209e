#include "refine_loop/llm/http_backend.hpp"

#include <cstdlib>

#include <httplib.h>

#include "refine_loop/core/error.hpp"

namespace refine_loop {

nlohmann::json build_wire_payload(const ChatRequest& request, const HttpBackendConfig& config) {
  nlohmann::json payload;
  payload["model"] = request.model_id.empty() ? config.model : request.model_id;
  payload["messages"] = nlohmann::json::array();
  for (const ChatMessage& message : request.messages) {
    payload["messages"].push_back({{"role", to_string(message.role)}, {"content", message.content}});
  }
  payload["temperature"] = request.temperature;
  payload["max_tokens"] = request.max_tokens;
  if (request.seed) payload["seed"] = *request.seed;
  if (request.reasoning_level) payload[config.reasoning_field] = to_string(*request.reasoning_level);
  return payload;
}

ChatResponse parse_wire_response(std::string_view body) {
  ChatResponse response;
  try {
    const auto root = nlohmann::json::parse(body);
    const auto& choice = root.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    response.content = content.is_string() ? content.get<std::string>() : std::string();
    response.finish_reason =
        parse_finish_reason(choice.contains("finish_reason") && choice["finish_reason"].is_string()
                                ? choice["finish_reason"].get<std::string>()
                                : std::string("stop"));
    if (root.contains("usage") && root["usage"].is_object()) {
      response.usage.prompt_tokens = root["usage"].value("prompt_tokens", std::int64_t{0});
      response.usage.completion_tokens = root["usage"].value("completion_tokens", std::int64_t{0});
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::UnparseablePayload, std::string("chat completion response: ") + e.what());
  }
  return response;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const std::size_t scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) raise(ErrorKind::InvalidConfig, "base_url needs a scheme: " + config_.base_url);
  const std::size_t path_start = config_.base_url.find('/', scheme_end + 3);
  origin_ = config_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (origin_.starts_with("https://")) {
    raise(ErrorKind::InvalidConfig, "this build has no TLS support; cannot reach " + origin_);
  }
#endif
}

ChatResponse HttpBackend::send(const ChatRequest& request) {
  httplib::Client client(origin_);
  const auto seconds = config_.timeout_ms / 1000;
  const auto micros = (config_.timeout_ms % 1000) * 1000;
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = build_wire_payload(request, config_).dump();
  auto result = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
  if (!result) {
    throw TransportError("POST " + origin_ + path_prefix_ + "/chat/completions: " + httplib::to_string(result.error()));
  }
  if (result->status == 429 || result->status >= 500) {
    throw TransportError("HTTP " + std::to_string(result->status) + " from " + origin_);
  }
  if (result->status != 200) {
    raise(ErrorKind::BackendRejected, "HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 200));
  }
  return parse_wire_response(result->body);
}

}  // namespace refine_loop
