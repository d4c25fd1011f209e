#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "refine_loop/llm/gateway.hpp"

namespace refine_loop {

enum class FieldKind { Integer, Text, Boolean, List };

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::Text;
  bool required = true;
};

using Schema = std::vector<FieldSpec>;

/// Cleans common LLM wrapping: curly quotes become straight quotes, and any
/// prose before the first '{'/'[' or after the last '}'/']' is dropped.
std::string repair_payload(std::string_view content);

/// Parses `content` as JSON. Only if that fails is repair_payload applied,
/// once, before a second parse. Throws UnparseablePayload.
nlohmann::json parse_payload(std::string_view content);

// Throws MissingField / WrongKind.
void check_fields(const nlohmann::json& object, const Schema& schema);

/// Record validated against a schema.
class StructuredRecord {
 public:
  StructuredRecord(nlohmann::json object, Schema schema);

  bool has(std::string_view name) const;
  std::int64_t integer(std::string_view name) const;
  std::string text(std::string_view name) const;
  bool boolean(std::string_view name) const;
  const nlohmann::json& list(std::string_view name) const;
  const nlohmann::json& raw() const noexcept { return object_; }

 private:
  const nlohmann::json& field(std::string_view name, FieldKind kind) const;

  nlohmann::json object_;
  Schema schema_;
};

StructuredRecord extract_structured(const ChatResponse& response, const Schema& schema);

}  // namespace refine_loop
