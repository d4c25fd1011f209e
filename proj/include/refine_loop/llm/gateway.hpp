#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace refine_loop {

enum class ChatRole { System, User, Assistant };

std::string_view to_string(ChatRole role) noexcept;

struct ChatMessage {
  ChatRole role = ChatRole::User;
  std::string content;
};

enum class ReasoningLevel { None, Low, Medium, High };

std::string_view to_string(ReasoningLevel level) noexcept;
ReasoningLevel parse_reasoning_level(std::string_view text);

// Bookkeeping carried with a request into the trace; never sent on the wire.
struct CallTag {
  std::string agent_role;
  int round = 0;
  std::string prompt_version;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  int max_tokens = 2048;
  std::optional<ReasoningLevel> reasoning_level;
  std::string model_id;
  CallTag tag;
};

// Non-empty messages, first role system or user, temperature >= 0, max_tokens > 0.
void validate(const ChatRequest& request);

enum class FinishReason { Stop, Length, Error };

std::string_view to_string(FinishReason reason) noexcept;
FinishReason parse_finish_reason(std::string_view text);

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ChatResponse {
  std::string content;
  FinishReason finish_reason = FinishReason::Stop;
  Usage usage;
  std::int64_t latency_ms = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  int base_backoff_ms = 500;
  double backoff_multiplier = 2.0;
};

void validate(const RetryPolicy& policy);

/// Stable 64-bit FNV-1a over role and content of every message, as 16 hex digits.
std::string prompt_fingerprint(std::span<const ChatMessage> messages);

/// Thrown by backends for failures worth retrying (connection refused,
/// timeouts, HTTP 5xx/429). Anything else is an Error and is not retried.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string id() const = 0;
  // Must be callable concurrently.
  virtual ChatResponse send(const ChatRequest& request) = 0;
};

using BackendPtr = std::shared_ptr<Backend>;

struct TraceEntry {
  std::string timestamp;
  std::string agent_role;
  int round = 0;
  std::string prompt_version;
  std::string backend_id;
  std::string prompt_fingerprint;
  std::int64_t latency_ms = 0;
  FinishReason finish_reason = FinishReason::Stop;
  Usage usage;
  int attempts = 0;
  std::string error;
};

/// Append-only call log. Appends are serialized; when a file path is set each
/// entry is also written there as one JSON line.
class TraceLog {
 public:
  TraceLog() = default;
  explicit TraceLog(std::filesystem::path mirror_path);

  void append(TraceEntry entry);
  std::vector<TraceEntry> entries() const;
  std::size_t size() const;
  std::size_t count_role(std::string_view agent_role) const;
  std::string to_jsonl() const;

 private:
  mutable std::mutex mutex_;
  std::vector<TraceEntry> entries_;
  std::optional<std::filesystem::path> mirror_path_;
};

std::string trace_entry_to_json(const TraceEntry& entry);

/// Sends `request` through `backend`, retrying TransportError with
/// exponential backoff. Exactly one trace entry is appended per call, failed
/// or not. Throws BackendUnreachable once retries are exhausted and
/// TokenLimit when the backend stops on length.
ChatResponse complete(const ChatRequest& request, Backend& backend, const RetryPolicy& policy, TraceLog& trace);

std::string utc_timestamp();

}  // namespace refine_loop
