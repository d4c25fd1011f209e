#include "refine_loop/core/io.hpp"

#include <fstream>
#include <sstream>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/text.hpp"

namespace refine_loop {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::int64_t non_negative_int(const json& record, const char* field, std::size_t line) {
  const json& value = record.at(field);
  if (!value.is_number_integer() || value.get<std::int64_t>() < 0) {
    raise(ErrorKind::MalformedRecord,
          "line " + std::to_string(line) + ": field '" + field + "' must be a non-negative integer");
  }
  return value.get<std::int64_t>();
}

bool is_header(const json& record) {
  return record.contains("id") && !record.contains("speaker") && !record.contains("text");
}

Turn turn_from_record(const json& record, std::size_t position, std::size_t line) {
  if (!record.is_object()) raise(ErrorKind::MalformedRecord, "line " + std::to_string(line) + " is not an object");
  if (!record.contains("speaker") || !record["speaker"].is_string()) {
    raise(ErrorKind::MalformedRecord, "line " + std::to_string(line) + ": missing speaker");
  }
  if (!record.contains("text") || !record["text"].is_string()) {
    raise(ErrorKind::MalformedRecord, "line " + std::to_string(line) + ": missing text");
  }
  Turn turn;
  turn.index = position;
  if (record.contains("index")) {
    const auto index = static_cast<std::size_t>(non_negative_int(record, "index", line));
    if (index != position) {
      raise(ErrorKind::NonContiguousIndex, "line " + std::to_string(line) + ": expected index " +
                                               std::to_string(position) + ", found " + std::to_string(index));
    }
  }
  turn.speaker = record["speaker"].get<std::string>();
  turn.text = record["text"].get<std::string>();
  if (record.contains("start_ms") && !record["start_ms"].is_null()) turn.start_ms = non_negative_int(record, "start_ms", line);
  if (record.contains("end_ms") && !record["end_ms"].is_null()) turn.end_ms = non_negative_int(record, "end_ms", line);
  return turn;
}

ordered_json turn_to_json(const Turn& turn) {
  ordered_json record;
  record["index"] = turn.index;
  record["speaker"] = turn.speaker;
  record["text"] = turn.text;
  if (turn.start_ms) record["start_ms"] = *turn.start_ms;
  if (turn.end_ms) record["end_ms"] = *turn.end_ms;
  return record;
}

}  // namespace

Dialogue parse_dialogue(std::string_view document, std::string_view fallback_id) {
  std::string id(fallback_id);
  std::vector<Turn> turns;
  std::size_t line_number = 0;
  std::size_t begin = 0;
  bool first_record = true;
  while (begin <= document.size()) {
    std::size_t end = document.find('\n', begin);
    if (end == std::string_view::npos) end = document.size();
    const std::string line = trim(document.substr(begin, end - begin));
    ++line_number;
    begin = end + 1;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      raise(ErrorKind::MalformedRecord, "line " + std::to_string(line_number) + ": " + e.what());
    }
    if (first_record && record.is_object() && is_header(record)) {
      if (!record["id"].is_string()) raise(ErrorKind::MalformedRecord, "header id must be a string");
      id = record["id"].get<std::string>();
      first_record = false;
      continue;
    }
    first_record = false;
    turns.push_back(turn_from_record(record, turns.size(), line_number));
  }
  if (turns.empty()) raise(ErrorKind::EmptyDialogue, "transcript '" + id + "' has no turn records");
  return make_dialogue(std::move(id), std::move(turns));
}

std::string serialize_dialogue(const Dialogue& dialogue) {
  std::string out = ordered_json{{"id", dialogue.id}}.dump() + "\n";
  for (const Turn& turn : dialogue.turns) out += turn_to_json(turn).dump() + "\n";
  return out;
}

ordered_json dialogue_to_json(const Dialogue& dialogue) {
  ordered_json object;
  object["id"] = dialogue.id;
  object["turns"] = ordered_json::array();
  for (const Turn& turn : dialogue.turns) object["turns"].push_back(turn_to_json(turn));
  return object;
}

Dialogue dialogue_from_json(const json& object) {
  if (!object.is_object() || !object.contains("turns") || !object["turns"].is_array()) {
    raise(ErrorKind::MalformedRecord, "dialogue object needs a 'turns' array");
  }
  std::vector<Turn> turns;
  for (const json& record : object["turns"]) turns.push_back(turn_from_record(record, turns.size(), turns.size() + 1));
  if (turns.empty()) raise(ErrorKind::EmptyDialogue, "dialogue has no turns");
  return make_dialogue(object.value("id", std::string("dialogue")), std::move(turns));
}

ordered_json summary_to_json(const Summary& summary) {
  ordered_json object;
  object["dialogue_id"] = summary.dialogue_id;
  object["revision_round"] = summary.revision_round;
  object["sentences"] = ordered_json::array();
  for (const SummarySentence& sentence : summary.sentences) {
    ordered_json item;
    item["index"] = sentence.index;
    item["text"] = sentence.text;
    item["attributions"] = sentence.attributions;
    item["origin"] = to_string(sentence.origin);
    object["sentences"].push_back(std::move(item));
  }
  return object;
}

Summary summary_from_json(const json& object) {
  try {
    Summary summary;
    summary.dialogue_id = object.at("dialogue_id").get<std::string>();
    summary.revision_round = object.value("revision_round", 0);
    for (const json& item : object.at("sentences")) {
      SummarySentence sentence;
      sentence.index = item.at("index").get<std::size_t>();
      sentence.text = nfc(item.at("text").get<std::string>());
      if (item.contains("attributions")) sentence.attributions = item["attributions"].get<std::vector<std::size_t>>();
      sentence.origin = parse_origin(item.value("origin", std::string("draft")));
      summary.sentences.push_back(std::move(sentence));
    }
    validate(summary);
    return summary;
  } catch (const json::exception& e) {
    raise(ErrorKind::MalformedRecord, std::string("summary document: ") + e.what());
  }
}

Summary parse_summary(std::string_view document) {
  json object;
  try {
    object = json::parse(document);
  } catch (const json::parse_error& e) {
    raise(ErrorKind::MalformedRecord, std::string("summary document: ") + e.what());
  }
  return summary_from_json(object);
}

std::string serialize_summary(const Summary& summary) { return summary_to_json(summary).dump(2) + "\n"; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorKind::Io, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) raise(ErrorKind::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Dialogue load_dialogue(const std::filesystem::path& path) {
  return parse_dialogue(read_file(path), path.stem().string());
}

Summary load_summary(const std::filesystem::path& path) { return parse_summary(read_file(path)); }

}  // namespace refine_loop
