#include "refine_loop/llm/structured.hpp"

#include <array>

#include "refine_loop/core/error.hpp"

namespace refine_loop {
namespace {

std::string_view kind_name(FieldKind kind) {
  switch (kind) {
    case FieldKind::Integer: return "integer";
    case FieldKind::Text: return "text";
    case FieldKind::Boolean: return "boolean";
    case FieldKind::List: return "list";
  }
  return "text";
}

bool has_kind(const nlohmann::json& value, FieldKind kind) {
  switch (kind) {
    case FieldKind::Integer: return value.is_number_integer();
    case FieldKind::Text: return value.is_string();
    case FieldKind::Boolean: return value.is_boolean();
    case FieldKind::List: return value.is_array();
  }
  return false;
}

std::string normalize_quotes(std::string_view content) {
  static constexpr std::array<std::pair<std::string_view, char>, 6> kQuotes = {{
      {"“", '"'}, {"”", '"'}, {"„", '"'}, {"‘", '\''}, {"’", '\''}, {"‚", '\''}}};
  std::string out;
  out.reserve(content.size());
  while (!content.empty()) {
    bool replaced = false;
    for (const auto& [from, to] : kQuotes) {
      if (content.starts_with(from)) {
        out.push_back(to);
        content.remove_prefix(from.size());
        replaced = true;
        break;
      }
    }
    if (!replaced) {
      out.push_back(content.front());
      content.remove_prefix(1);
    }
  }
  return out;
}

}  // namespace

std::string repair_payload(std::string_view content) {
  const std::string normalized = normalize_quotes(content);
  const std::size_t first = normalized.find_first_of("{[");
  const std::size_t last = normalized.find_last_of("}]");
  if (first == std::string::npos || last == std::string::npos || last < first) return normalized;
  return normalized.substr(first, last - first + 1);
}

nlohmann::json parse_payload(std::string_view content) {
  if (auto parsed = nlohmann::json::parse(content, nullptr, false); !parsed.is_discarded()) return parsed;
  auto repaired = nlohmann::json::parse(repair_payload(content), nullptr, false);
  if (repaired.is_discarded()) {
    const std::string preview(content.substr(0, 120));
    raise(ErrorKind::UnparseablePayload, "no structured payload in response: '" + preview + "'");
  }
  return repaired;
}

void check_fields(const nlohmann::json& object, const Schema& schema) {
  if (!object.is_object()) raise(ErrorKind::WrongKind, "payload is not an object");
  for (const FieldSpec& spec : schema) {
    if (!object.contains(spec.name) || object[spec.name].is_null()) {
      if (spec.required) raise(ErrorKind::MissingField, "missing field '" + spec.name + "'");
      continue;
    }
    if (!has_kind(object[spec.name], spec.kind)) {
      raise(ErrorKind::WrongKind, "field '" + spec.name + "' should be " + std::string(kind_name(spec.kind)) +
                                      ", got " + object[spec.name].dump());
    }
  }
}

StructuredRecord::StructuredRecord(nlohmann::json object, Schema schema)
    : object_(std::move(object)), schema_(std::move(schema)) {
  check_fields(object_, schema_);
}

bool StructuredRecord::has(std::string_view name) const {
  const auto it = object_.find(name);
  return it != object_.end() && !it->is_null();
}

const nlohmann::json& StructuredRecord::field(std::string_view name, FieldKind kind) const {
  const auto it = object_.find(name);
  if (it == object_.end() || it->is_null()) raise(ErrorKind::MissingField, "missing field '" + std::string(name) + "'");
  if (!has_kind(*it, kind)) {
    raise(ErrorKind::WrongKind, "field '" + std::string(name) + "' is not " + std::string(kind_name(kind)));
  }
  return *it;
}

std::int64_t StructuredRecord::integer(std::string_view name) const {
  return field(name, FieldKind::Integer).get<std::int64_t>();
}

std::string StructuredRecord::text(std::string_view name) const {
  return field(name, FieldKind::Text).get<std::string>();
}

bool StructuredRecord::boolean(std::string_view name) const { return field(name, FieldKind::Boolean).get<bool>(); }

const nlohmann::json& StructuredRecord::list(std::string_view name) const { return field(name, FieldKind::List); }

StructuredRecord extract_structured(const ChatResponse& response, const Schema& schema) {
  return StructuredRecord(parse_payload(response.content), schema);
}

}  // namespace refine_loop
