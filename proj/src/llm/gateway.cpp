#include "refine_loop/llm/gateway.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/text.hpp"

namespace refine_loop {

std::string_view to_string(ChatRole role) noexcept {
  switch (role) {
    case ChatRole::System: return "system";
    case ChatRole::User: return "user";
    case ChatRole::Assistant: return "assistant";
  }
  return "user";
}

std::string_view to_string(ReasoningLevel level) noexcept {
  switch (level) {
    case ReasoningLevel::None: return "none";
    case ReasoningLevel::Low: return "low";
    case ReasoningLevel::Medium: return "medium";
    case ReasoningLevel::High: return "high";
  }
  return "none";
}

ReasoningLevel parse_reasoning_level(std::string_view text) {
  const std::string lower = to_lower_ascii(trim(text));
  if (lower == "none") return ReasoningLevel::None;
  if (lower == "low") return ReasoningLevel::Low;
  if (lower == "medium" || lower == "med") return ReasoningLevel::Medium;
  if (lower == "high") return ReasoningLevel::High;
  raise(ErrorKind::InvalidValue, "unknown reasoning level '" + std::string(text) + "'");
}

std::string_view to_string(FinishReason reason) noexcept {
  switch (reason) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Error: return "error";
  }
  return "error";
}

FinishReason parse_finish_reason(std::string_view text) {
  if (text == "stop" || text.empty()) return FinishReason::Stop;
  if (text == "length") return FinishReason::Length;
  return FinishReason::Error;
}

void validate(const ChatRequest& request) {
  if (request.messages.empty()) raise(ErrorKind::InvalidValue, "chat request has no messages");
  if (request.messages.front().role == ChatRole::Assistant) {
    raise(ErrorKind::InvalidValue, "first message must be a system or user message");
  }
  if (!(request.temperature >= 0.0)) raise(ErrorKind::InvalidValue, "temperature must be >= 0");
  if (request.max_tokens <= 0) raise(ErrorKind::InvalidValue, "max_tokens must be positive");
}

void validate(const RetryPolicy& policy) {
  if (policy.max_attempts < 1) raise(ErrorKind::InvalidConfig, "max_attempts must be >= 1");
  if (policy.base_backoff_ms < 1) raise(ErrorKind::InvalidConfig, "base_backoff_ms must be >= 1");
  if (!(policy.backoff_multiplier >= 1.0)) raise(ErrorKind::InvalidConfig, "backoff_multiplier must be >= 1");
}

std::string prompt_fingerprint(std::span<const ChatMessage> messages) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto mix = [&hash](std::string_view bytes) {
    for (unsigned char c : bytes) {
      hash ^= c;
      hash *= 0x100000001b3ULL;
    }
  };
  for (const ChatMessage& message : messages) {
    mix(to_string(message.role));
    mix("\x1f");
    mix(message.content);
    mix("\x1e");
  }
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto millis = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t seconds = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&seconds, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03lldZ", buffer, static_cast<long long>(millis));
  return out;
}

std::string trace_entry_to_json(const TraceEntry& entry) {
  nlohmann::ordered_json record;
  record["timestamp"] = entry.timestamp;
  record["agent_role"] = entry.agent_role;
  record["round"] = entry.round;
  record["prompt_version"] = entry.prompt_version;
  record["backend_id"] = entry.backend_id;
  record["prompt_fingerprint"] = entry.prompt_fingerprint;
  record["latency_ms"] = entry.latency_ms;
  record["finish_reason"] = to_string(entry.finish_reason);
  record["usage"] = {{"prompt_tokens", entry.usage.prompt_tokens},
                     {"completion_tokens", entry.usage.completion_tokens}};
  record["attempts"] = entry.attempts;
  if (!entry.error.empty()) record["error"] = entry.error;
  return record.dump();
}

TraceLog::TraceLog(std::filesystem::path mirror_path) : mirror_path_(std::move(mirror_path)) {}

void TraceLog::append(TraceEntry entry) {
  std::lock_guard lock(mutex_);
  if (mirror_path_) {
    std::ofstream out(*mirror_path_, std::ios::app);
    out << trace_entry_to_json(entry) << '\n';
  }
  entries_.push_back(std::move(entry));
}

std::vector<TraceEntry> TraceLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t TraceLog::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::size_t TraceLog::count_role(std::string_view agent_role) const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const TraceEntry& entry : entries_) n += entry.agent_role == agent_role ? 1 : 0;
  return n;
}

std::string TraceLog::to_jsonl() const {
  std::lock_guard lock(mutex_);
  std::string out;
  for (const TraceEntry& entry : entries_) out += trace_entry_to_json(entry) + "\n";
  return out;
}

ChatResponse complete(const ChatRequest& request, Backend& backend, const RetryPolicy& policy, TraceLog& trace) {
  validate(policy);
  TraceEntry entry;
  entry.timestamp = utc_timestamp();
  entry.agent_role = request.tag.agent_role;
  entry.round = request.tag.round;
  entry.prompt_version = request.tag.prompt_version;
  entry.backend_id = backend.id();
  entry.prompt_fingerprint = prompt_fingerprint(request.messages);

  const auto started = std::chrono::steady_clock::now();
  auto elapsed_ms = [&started] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
  };
  auto fail = [&](ErrorKind kind, const std::string& message) -> ChatResponse {
    entry.finish_reason = FinishReason::Error;
    entry.latency_ms = elapsed_ms();
    entry.error = message;
    trace.append(entry);
    raise(kind, message);
  };

  try {
    validate(request);
  } catch (const Error& e) {
    return fail(e.kind(), e.what());
  }

  std::string last_transport_error;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    entry.attempts = attempt;
    try {
      ChatResponse response = backend.send(request);
      response.latency_ms = elapsed_ms();
      entry.latency_ms = response.latency_ms;
      entry.finish_reason = response.finish_reason;
      entry.usage = response.usage;
      if (response.finish_reason == FinishReason::Length) {
        entry.error = "token limit reached";
        trace.append(entry);
        raise(ErrorKind::TokenLimit, "backend '" + backend.id() + "' stopped at max_tokens");
      }
      if (response.finish_reason == FinishReason::Error) {
        return fail(ErrorKind::BackendRejected, "backend '" + backend.id() + "' reported an error");
      }
      trace.append(entry);
      return response;
    } catch (const TransportError& e) {
      last_transport_error = e.what();
      if (attempt < policy.max_attempts) {
        const double delay = policy.base_backoff_ms * std::pow(policy.backoff_multiplier, attempt - 1);
        std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<std::int64_t>(delay)));
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::TokenLimit) throw;
      return fail(e.kind(), e.what());
    }
  }
  return fail(ErrorKind::BackendUnreachable, "backend '" + backend.id() + "' failed after " +
                                                 std::to_string(policy.max_attempts) +
                                                 " attempts: " + last_transport_error);
}

}  // namespace refine_loop
