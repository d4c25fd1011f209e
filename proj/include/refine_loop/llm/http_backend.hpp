#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "refine_loop/llm/gateway.hpp"

namespace refine_loop {

struct HttpBackendConfig {
  std::string id = "http";
  // e.g. "https://api.example.com/v1"; requests go to {base_url}/chat/completions.
  std::string base_url;
  std::string model;
  std::string api_key_env = "REFINE_LOOP_API_KEY";
  // Vendor field that carries reasoning_level.
  std::string reasoning_field = "reasoning_effort";
  int timeout_ms = 120000;
};

/// OpenAI-compatible chat-completions body for `request`.
nlohmann::json build_wire_payload(const ChatRequest& request, const HttpBackendConfig& config);

// Parses choices[0].message.content, finish_reason and usage.
ChatResponse parse_wire_response(std::string_view body);

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  std::string id() const override { return config_.id; }
  ChatResponse send(const ChatRequest& request) override;

  const HttpBackendConfig& config() const noexcept { return config_; }

 private:
  HttpBackendConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_prefix_;
};

}  // namespace refine_loop
