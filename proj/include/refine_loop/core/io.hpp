#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "refine_loop/core/model.hpp"

namespace refine_loop {

/// Transcript document: UTF-8, one JSON object per line. An optional header
/// line {"id": ...} precedes the turn records
/// {"index", "speaker", "text", "start_ms"?, "end_ms"?}. A missing "index"
/// takes the record's position; a missing header uses `fallback_id`.
Dialogue parse_dialogue(std::string_view document, std::string_view fallback_id = "dialogue");
std::string serialize_dialogue(const Dialogue& dialogue);

/// Summary document: one JSON object
/// {"dialogue_id", "revision_round", "sentences": [{"index", "text", "attributions", "origin"}]}.
Summary parse_summary(std::string_view document);
std::string serialize_summary(const Summary& summary);

nlohmann::ordered_json summary_to_json(const Summary& summary);
Summary summary_from_json(const nlohmann::json& object);
nlohmann::ordered_json dialogue_to_json(const Dialogue& dialogue);
Dialogue dialogue_from_json(const nlohmann::json& object);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary file and rename, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view contents);

Dialogue load_dialogue(const std::filesystem::path& path);
Summary load_summary(const std::filesystem::path& path);

}  // namespace refine_loop
