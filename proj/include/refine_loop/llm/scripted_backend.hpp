#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "refine_loop/llm/gateway.hpp"

namespace refine_loop {

enum class ScriptMatcher { ExactPromptHash, ContainsSubstring, SequencePosition };

std::string_view to_string(ScriptMatcher matcher) noexcept;
ScriptMatcher parse_script_matcher(std::string_view text);

/// One scripted reply. Optional `role` and `round` filters restrict the entry
/// to requests tagged with that agent role / round.
///
///  - exact_prompt_hash: `key` equals prompt_fingerprint(messages)
///  - contains_substring: some message contains `key` (empty key matches all)
///  - sequence_position: `key` is the 0-based request number seen by this
///    backend; an empty key means "the n-th sequence entry answers request n"
struct ScriptEntry {
  ScriptMatcher matcher = ScriptMatcher::ContainsSubstring;
  std::string key;
  std::string response;
  std::optional<std::string> role;
  std::optional<int> round;
  FinishReason finish_reason = FinishReason::Stop;
};

/// Deterministic offline backend. A request resolves to the first entry in
/// listed order whose filters and matcher accept it; no match is ScriptMiss.
/// The request counter is atomic, so sequence-position scripts are only
/// order-stable when requests are issued sequentially.
class ScriptedBackend final : public Backend {
 public:
  ScriptedBackend(std::string id, std::vector<ScriptEntry> entries);

  std::string id() const override { return id_; }
  ChatResponse send(const ChatRequest& request) override;

  std::size_t requests_seen() const noexcept { return counter_.load(); }
  const std::vector<ScriptEntry>& entries() const noexcept { return entries_; }

 private:
  std::string id_;
  std::vector<ScriptEntry> entries_;
  std::vector<std::optional<std::size_t>> positions_;
  std::atomic<std::size_t> counter_{0};
};

/// Script document: {"backend_id": "...", "entries": [{"matcher", "key",
/// "response", "role"?, "round"?, "finish_reason"?}]} or a bare entry array.
/// A "response" may be a JSON value instead of a string; it is then dumped.
std::vector<ScriptEntry> parse_script(std::string_view document, std::string* backend_id = nullptr);
std::shared_ptr<ScriptedBackend> load_scripted_backend(const std::filesystem::path& path);

/// Backend that answers through a callback; used by tests and by in-process
/// oracle judges.
class CallbackBackend final : public Backend {
 public:
  using Handler = std::function<std::string(const ChatRequest&)>;

  CallbackBackend(std::string id, Handler handler);

  std::string id() const override { return id_; }
  ChatResponse send(const ChatRequest& request) override;

 private:
  std::string id_;
  Handler handler_;
};

}  // namespace refine_loop
