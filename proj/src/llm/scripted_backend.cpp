#include "refine_loop/llm/scripted_backend.hpp"

#include <charconv>

#include <nlohmann/json.hpp>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/io.hpp"
#include "refine_loop/core/text.hpp"

namespace refine_loop {
namespace {

std::int64_t rough_token_count(std::string_view text) {
  return static_cast<std::int64_t>(split_whitespace(text).size());
}

Usage usage_for(const ChatRequest& request, std::string_view reply) {
  Usage usage;
  for (const ChatMessage& message : request.messages) usage.prompt_tokens += rough_token_count(message.content);
  usage.completion_tokens = rough_token_count(reply);
  return usage;
}

}  // namespace

std::string_view to_string(ScriptMatcher matcher) noexcept {
  switch (matcher) {
    case ScriptMatcher::ExactPromptHash: return "exact_prompt_hash";
    case ScriptMatcher::ContainsSubstring: return "contains_substring";
    case ScriptMatcher::SequencePosition: return "sequence_position";
  }
  return "contains_substring";
}

ScriptMatcher parse_script_matcher(std::string_view text) {
  if (text == "exact_prompt_hash") return ScriptMatcher::ExactPromptHash;
  if (text == "contains_substring") return ScriptMatcher::ContainsSubstring;
  if (text == "sequence_position") return ScriptMatcher::SequencePosition;
  raise(ErrorKind::MalformedRecord, "unknown script matcher '" + std::string(text) + "'");
}

ScriptedBackend::ScriptedBackend(std::string id, std::vector<ScriptEntry> entries)
    : id_(std::move(id)), entries_(std::move(entries)) {
  std::size_t implicit = 0;
  positions_.reserve(entries_.size());
  for (const ScriptEntry& entry : entries_) {
    if (entry.matcher != ScriptMatcher::SequencePosition) {
      positions_.emplace_back();
      continue;
    }
    if (entry.key.empty()) {
      positions_.emplace_back(implicit++);
      continue;
    }
    std::size_t position = 0;
    const auto [ptr, ec] = std::from_chars(entry.key.data(), entry.key.data() + entry.key.size(), position);
    if (ec != std::errc() || ptr != entry.key.data() + entry.key.size()) {
      raise(ErrorKind::MalformedRecord, "sequence_position key must be a non-negative integer, got '" + entry.key + "'");
    }
    positions_.emplace_back(position);
    ++implicit;
  }
}

ChatResponse ScriptedBackend::send(const ChatRequest& request) {
  const std::size_t position = counter_.fetch_add(1);
  std::string fingerprint;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const ScriptEntry& entry = entries_[i];
    if (entry.role && *entry.role != request.tag.agent_role) continue;
    if (entry.round && *entry.round != request.tag.round) continue;
    bool matched = false;
    switch (entry.matcher) {
      case ScriptMatcher::ExactPromptHash:
        if (fingerprint.empty()) fingerprint = prompt_fingerprint(request.messages);
        matched = entry.key == fingerprint;
        break;
      case ScriptMatcher::ContainsSubstring:
        for (const ChatMessage& message : request.messages) {
          if (message.content.find(entry.key) != std::string::npos) {
            matched = true;
            break;
          }
        }
        break;
      case ScriptMatcher::SequencePosition:
        matched = positions_[i] == position;
        break;
    }
    if (!matched) continue;
    ChatResponse response;
    response.content = entry.response;
    response.finish_reason = entry.finish_reason;
    response.usage = usage_for(request, entry.response);
    return response;
  }
  raise(ErrorKind::ScriptMiss, "backend '" + id_ + "': no script entry for request #" + std::to_string(position) +
                                   " (role '" + request.tag.agent_role + "', round " +
                                   std::to_string(request.tag.round) + ")");
}

std::vector<ScriptEntry> parse_script(std::string_view document, std::string* backend_id) {
  std::vector<ScriptEntry> entries;
  try {
    const auto root = nlohmann::json::parse(document);
    const nlohmann::json& list = root.is_array() ? root : root.at("entries");
    if (backend_id && root.is_object() && root.contains("backend_id")) *backend_id = root["backend_id"].get<std::string>();
    for (const auto& item : list) {
      ScriptEntry entry;
      entry.matcher = parse_script_matcher(item.value("matcher", std::string("contains_substring")));
      if (item.contains("key")) {
        entry.key = item["key"].is_string() ? item["key"].get<std::string>() : item["key"].dump();
      }
      const auto& response = item.at("response");
      entry.response = response.is_string() ? response.get<std::string>() : response.dump();
      if (item.contains("role")) entry.role = item["role"].get<std::string>();
      if (item.contains("round")) entry.round = item["round"].get<int>();
      if (item.contains("finish_reason")) entry.finish_reason = parse_finish_reason(item["finish_reason"].get<std::string>());
      entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::MalformedRecord, std::string("script document: ") + e.what());
  }
  return entries;
}

std::shared_ptr<ScriptedBackend> load_scripted_backend(const std::filesystem::path& path) {
  std::string id = "scripted:" + path.stem().string();
  auto entries = parse_script(read_file(path), &id);
  return std::make_shared<ScriptedBackend>(std::move(id), std::move(entries));
}

CallbackBackend::CallbackBackend(std::string id, Handler handler) : id_(std::move(id)), handler_(std::move(handler)) {}

ChatResponse CallbackBackend::send(const ChatRequest& request) {
  ChatResponse response;
  response.content = handler_(request);
  response.usage = usage_for(request, response.content);
  return response;
}

}  // namespace refine_loop
