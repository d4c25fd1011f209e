#include "refine_loop/agents/agents.hpp"

#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/log.hpp"
#include "refine_loop/core/text.hpp"
#include "refine_loop/llm/structured.hpp"

namespace refine_loop {
namespace {

using nlohmann::json;

struct SentenceEdit {
  bool remove = false;
  std::string text;
};

const json& list_field(const json& payload, const char* field) {
  static const json kEmpty = json::array();
  if (payload.is_array()) return payload;
  if (!payload.is_object()) raise(ErrorKind::WrongKind, "reply is neither an object nor a list");
  if (!payload.contains(field) || payload[field].is_null()) return kEmpty;
  if (!payload[field].is_array()) raise(ErrorKind::WrongKind, std::string("field '") + field + "' must be a list");
  return payload[field];
}

std::map<std::size_t, SentenceEdit> parse_edits(const json& edits, std::size_t sentence_count, std::string_view agent) {
  static const Schema kEditSchema = {{"sentence_index", FieldKind::Integer, true},
                                     {"action", FieldKind::Text, false},
                                     {"text", FieldKind::Text, false}};
  std::map<std::size_t, SentenceEdit> out;
  for (const json& item : edits) {
    check_fields(item, kEditSchema);
    const auto index = item["sentence_index"].get<std::int64_t>();
    if (index < 0 || static_cast<std::size_t>(index) >= sentence_count) {
      log_warn(std::string(agent) + ": dropping edit for nonexistent sentence " + std::to_string(index));
      continue;
    }
    const std::string action = to_lower_ascii(item.value("action", std::string("replace")));
    SentenceEdit edit;
    if (action == "delete") {
      edit.remove = true;
    } else if (action == "replace") {
      if (!item.contains("text")) raise(ErrorKind::MissingField, "replace edit needs 'text'");
      edit.text = trim(nfc(item["text"].get<std::string>()));
      if (edit.text.empty()) edit.remove = true;
    } else {
      raise(ErrorKind::WrongKind, "edit action must be 'replace' or 'delete', got '" + action + "'");
    }
    if (!out.emplace(static_cast<std::size_t>(index), std::move(edit)).second) {
      log_warn(std::string(agent) + ": ignoring repeated edit for sentence " + std::to_string(index));
    }
  }
  return out;
}

std::string_view directive_text(RefineDirective directive) {
  switch (directive) {
    case RefineDirective::Delete: return "DELETE (superfluous content)";
    case RefineDirective::FixAccuracy: return "REWRITE to fix accuracy";
    case RefineDirective::FixReadability: return "REWRITE to fix readability";
  }
  return "REWRITE";
}

}  // namespace

ChatResponse call_agent(const LlmHandle& llm, const PromptTemplate& prompt, const Bindings& bindings, int round,
                        std::span<const ChatMessage> follow_up) {
  if (!llm.backend) raise(ErrorKind::InvalidConfig, "no backend configured for " + std::string(to_string(prompt.role)));
  const RenderedPrompt rendered = render_prompt(prompt, bindings);
  ChatRequest request;
  if (!rendered.system.empty()) request.messages.push_back({ChatRole::System, rendered.system});
  request.messages.push_back({ChatRole::User, rendered.user});
  request.messages.insert(request.messages.end(), follow_up.begin(), follow_up.end());
  request.temperature = llm.temperature;
  request.seed = llm.seed;
  request.max_tokens = llm.max_tokens;
  request.reasoning_level = llm.reasoning_level;
  request.model_id = llm.model_id;
  request.tag = {std::string(to_string(prompt.role)), round, prompt.version};
  return complete(request, *llm.backend, llm.policy, *llm.trace);
}

std::string format_dialogue(const Dialogue& dialogue) {
  std::string out;
  for (const Turn& turn : dialogue.turns) {
    out += "[" + std::to_string(turn.index) + "] " + turn.speaker + ": " + turn.text + "\n";
  }
  return out;
}

std::string format_summary(const Summary& summary) {
  std::string out;
  for (const SummarySentence& sentence : summary.sentences) {
    out += "[" + std::to_string(sentence.index) + "] " + sentence.text + "\n";
  }
  return out;
}

std::size_t EvaluationReport::fail_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(feedback.begin(), feedback.end(), [](const SentenceFeedback& item) {
    return !item.is_missing() && item.label == Label::Fail;
  }));
}

std::size_t EvaluationReport::missing_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(feedback.begin(), feedback.end(), [](const SentenceFeedback& item) { return item.is_missing(); }));
}

std::vector<SentenceFeedback> EvaluationReport::for_dimension(Dimension dimension) const {
  std::vector<SentenceFeedback> out;
  std::copy_if(feedback.begin(), feedback.end(), std::back_inserter(out),
               [dimension](const SentenceFeedback& item) { return item.dimension == dimension; });
  return out;
}

std::vector<SentenceFeedback> EvaluationReport::missing_facts() const {
  std::vector<SentenceFeedback> out;
  std::copy_if(feedback.begin(), feedback.end(), std::back_inserter(out),
               [](const SentenceFeedback& item) { return item.is_missing(); });
  return out;
}

bool EvaluationReport::sentence_failed(std::size_t index) const noexcept {
  return std::any_of(feedback.begin(), feedback.end(), [index](const SentenceFeedback& item) {
    return item.sentence_index == index && item.label == Label::Fail;
  });
}

nlohmann::ordered_json report_to_json(const EvaluationReport& report) {
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  for (const SentenceFeedback& item : report.feedback) {
    nlohmann::ordered_json entry;
    entry["dimension"] = to_string(item.dimension);
    if (item.sentence_index) {
      entry["sentence_index"] = *item.sentence_index;
    } else {
      entry["sentence_index"] = "MISSING";
    }
    entry["label"] = to_string(item.label);
    entry["explanation"] = item.explanation;
    if (item.defaulted) entry["defaulted"] = true;
    items.push_back(std::move(entry));
  }
  nlohmann::ordered_json out;
  out["round"] = report.round;
  out["fail_count"] = report.fail_count();
  out["missing_count"] = report.missing_count();
  out["feedback"] = std::move(items);
  return out;
}

EvaluationReport merge_reports(int round, std::vector<std::vector<SentenceFeedback>> per_dimension) {
  EvaluationReport report;
  report.round = round;
  for (Dimension dimension : kAllDimensions) {
    for (auto& list : per_dimension) {
      for (auto& item : list) {
        if (item.dimension == dimension) report.feedback.push_back(std::move(item));
      }
    }
  }
  return report;
}

Summary summary_from_reply(const std::string& dialogue_id, const std::string& reply, SentenceOrigin origin) {
  std::vector<std::string> sentences = split_sentences(nfc(reply));
  if (sentences.empty()) raise(ErrorKind::EmptyDraft, "the model returned no summary sentences");
  return make_summary(dialogue_id, sentences, origin, 0);
}

Summary draft(const Dialogue& dialogue, const PromptTemplate& prompt, const LlmHandle& llm) {
  const ChatResponse response = call_agent(llm, prompt, {{"dialogue", format_dialogue(dialogue)}}, 0);
  return summary_from_reply(dialogue.id, response.content, SentenceOrigin::Draft);
}

std::vector<SentenceFeedback> parse_feedback(const std::string& reply, Dimension dimension,
                                             std::size_t sentence_count) {
  static const Schema kItemSchema = {{"label", FieldKind::Text, true}, {"explanation", FieldKind::Text, false}};
  const json payload = parse_payload(reply);
  const json& items = list_field(payload, "feedback");

  std::vector<std::optional<SentenceFeedback>> per_sentence(sentence_count);
  std::vector<SentenceFeedback> missing;
  const std::string agent = "evaluator " + std::string(to_string(dimension));
  for (const json& item : items) {
    check_fields(item, kItemSchema);
    if (!item.contains("sentence_index")) raise(ErrorKind::MissingField, "feedback item lacks 'sentence_index'");
    SentenceFeedback feedback;
    feedback.dimension = dimension;
    feedback.label = parse_label(item["label"].get<std::string>());
    feedback.explanation = trim(item.value("explanation", std::string()));
    if (feedback.label == Label::Fail && feedback.explanation.empty()) {
      raise(ErrorKind::MissingField, agent + ": a fail label needs an explanation");
    }
    const json& index = item["sentence_index"];
    if (index.is_string()) {
      if (to_lower_ascii(trim(index.get<std::string>())) != "missing") {
        raise(ErrorKind::WrongKind, "sentence_index must be an integer or \"MISSING\"");
      }
      if (dimension != Dimension::Completeness || feedback.label != Label::Fail) {
        log_warn(agent + ": dropping MISSING item (only Completeness may report missing facts, as fails)");
        continue;
      }
      missing.push_back(std::move(feedback));
      continue;
    }
    if (!index.is_number_integer()) raise(ErrorKind::WrongKind, "sentence_index must be an integer or \"MISSING\"");
    const auto value = index.get<std::int64_t>();
    if (value < 0 || static_cast<std::size_t>(value) >= sentence_count) {
      log_warn(agent + ": IndexOutOfRange, dropping feedback for sentence " + std::to_string(value));
      continue;
    }
    auto& slot = per_sentence[static_cast<std::size_t>(value)];
    if (slot) {
      log_warn(agent + ": duplicate feedback for sentence " + std::to_string(value) + " ignored");
      continue;
    }
    feedback.sentence_index = static_cast<std::size_t>(value);
    slot = std::move(feedback);
  }

  std::vector<SentenceFeedback> out;
  out.reserve(sentence_count + missing.size());
  for (std::size_t i = 0; i < sentence_count; ++i) {
    if (per_sentence[i]) {
      out.push_back(std::move(*per_sentence[i]));
    } else {
      out.push_back(SentenceFeedback{dimension, i, Label::Pass, {}, true});
    }
  }
  for (auto& item : missing) out.push_back(std::move(item));
  return out;
}

std::vector<SentenceFeedback> evaluate_dimension(const Dialogue& dialogue, const Summary& summary, Dimension dimension,
                                                 const PromptTemplate& prompt, const LlmHandle& llm) {
  if (prompt.role != evaluator_role(dimension)) {
    raise(ErrorKind::InvalidConfig, "template role '" + std::string(to_string(prompt.role)) + "' cannot evaluate " +
                                        std::string(to_string(dimension)));
  }
  const ChatResponse response = call_agent(
      llm, prompt, {{"dialogue", format_dialogue(dialogue)}, {"summary", format_summary(summary)}},
      summary.revision_round + 1);
  return parse_feedback(response.content, dimension, summary.sentences.size());
}

std::optional<RefineDirective> refine_directive(const EvaluationReport& report, std::size_t sentence_index) {
  std::optional<RefineDirective> directive;
  for (const SentenceFeedback& item : report.feedback) {
    if (item.sentence_index != sentence_index || item.label != Label::Fail) continue;
    RefineDirective candidate = RefineDirective::FixReadability;
    if (item.dimension == Dimension::Completeness) candidate = RefineDirective::Delete;
    if (item.dimension == Dimension::Accuracy) candidate = RefineDirective::FixAccuracy;
    if (!directive || candidate < *directive) directive = candidate;
  }
  return directive;
}

std::string format_feedback(const Summary& summary, const EvaluationReport& report) {
  std::string out;
  for (const SummarySentence& sentence : summary.sentences) {
    const auto directive = refine_directive(report, sentence.index);
    if (!directive) continue;
    out += "Sentence [" + std::to_string(sentence.index) + "] " + std::string(directive_text(*directive)) + "\n";
    for (const SentenceFeedback& item : report.feedback) {
      if (item.sentence_index == sentence.index && item.label == Label::Fail) {
        out += "  - " + std::string(to_string(item.dimension)) + ": " + item.explanation + "\n";
      }
    }
  }
  const auto missing = report.missing_facts();
  if (!missing.empty()) {
    out += "Missing facts:\n";
    for (std::size_t k = 0; k < missing.size(); ++k) {
      out += "  (" + std::to_string(k) + ") " + missing[k].explanation + "\n";
    }
  }
  if (out.empty()) out = "No issues.\n";
  return out;
}

Summary refine(const Dialogue& dialogue, const Summary& summary, const EvaluationReport& report,
               const PromptTemplate& prompt, const LlmHandle& llm) {
  if (report.round != summary.revision_round + 1) {
    raise(ErrorKind::InvalidValue, "report is for round " + std::to_string(report.round) +
                                       " but the summary is at revision " + std::to_string(summary.revision_round));
  }
  Summary out = summary;
  out.revision_round = summary.revision_round + 1;
  if (report.clean()) return out;

  const ChatResponse response = call_agent(llm, prompt,
                                           {{"dialogue", format_dialogue(dialogue)},
                                            {"summary", format_summary(summary)},
                                            {"feedback", format_feedback(summary, report)}},
                                           report.round);
  const json payload = parse_payload(response.content);
  std::map<std::size_t, SentenceEdit> edits =
      parse_edits(list_field(payload, "edits"), summary.sentences.size(), "refine");

  for (auto it = edits.begin(); it != edits.end();) {
    const bool allowed = report.sentence_failed(it->first);
    const bool changes = it->second.remove || it->second.text != summary.sentences[it->first].text;
    if (!allowed && changes) {
      log_warn("refine: ContractViolation, sentence " + std::to_string(it->first) +
               " passed every evaluator; original restored");
    }
    if (!allowed) {
      it = edits.erase(it);
    } else {
      ++it;
    }
  }

  const auto missing = report.missing_facts();
  std::vector<std::pair<std::optional<std::int64_t>, std::string>> insertions;
  std::vector<bool> used(missing.size(), false);
  if (payload.is_object() && payload.contains("insertions")) {
    static const Schema kInsertSchema = {{"missing_index", FieldKind::Integer, true},
                                         {"text", FieldKind::Text, true},
                                         {"after", FieldKind::Integer, false}};
    for (const json& item : payload["insertions"]) {
      check_fields(item, kInsertSchema);
      const auto k = item["missing_index"].get<std::int64_t>();
      if (k < 0 || static_cast<std::size_t>(k) >= missing.size()) {
        log_warn("refine: dropping insertion for unknown missing fact " + std::to_string(k));
        continue;
      }
      if (used[static_cast<std::size_t>(k)]) {
        log_warn("refine: second insertion for missing fact " + std::to_string(k) + " ignored");
        continue;
      }
      std::string text = trim(nfc(item["text"].get<std::string>()));
      if (text.empty()) continue;
      used[static_cast<std::size_t>(k)] = true;
      std::optional<std::int64_t> after;
      if (item.contains("after") && !item["after"].is_null()) after = item["after"].get<std::int64_t>();
      insertions.emplace_back(after, std::move(text));
    }
  }

  auto inserted_sentence = [](std::string text) {
    return SummarySentence{0, std::move(text), {}, SentenceOrigin::Inserted};
  };

  out.sentences.clear();
  for (const auto& [after, text] : insertions) {
    if (after && *after < 0) out.sentences.push_back(inserted_sentence(text));
  }
  for (const SummarySentence& sentence : summary.sentences) {
    const auto edit = edits.find(sentence.index);
    if (edit == edits.end()) {
      if (report.sentence_failed(sentence.index)) {
        log_warn("refine: failed sentence " + std::to_string(sentence.index) + " left unchanged by the model");
      }
      out.sentences.push_back(sentence);
    } else if (!edit->second.remove) {
      SummarySentence revised = sentence;
      if (revised.text != edit->second.text) {
        revised.text = edit->second.text;
        revised.origin = SentenceOrigin::Refined;
      }
      out.sentences.push_back(std::move(revised));
    }
    for (const auto& [after, text] : insertions) {
      if (after && *after == static_cast<std::int64_t>(sentence.index)) out.sentences.push_back(inserted_sentence(text));
    }
  }
  for (const auto& [after, text] : insertions) {
    if (!after || *after >= static_cast<std::int64_t>(summary.sentences.size())) {
      out.sentences.push_back(inserted_sentence(text));
    }
  }
  reindex(out);
  return out;
}

Summary check_redundancy(const Summary& summary, const PromptTemplate& prompt, const LlmHandle& llm) {
  if (prompt.role != AgentRole::Redundancy) {
    raise(ErrorKind::InvalidConfig, "redundancy checker needs a redundancy template");
  }
  const ChatResponse response =
      call_agent(llm, prompt, {{"summary", format_summary(summary)}}, summary.revision_round);
  const json payload = parse_payload(response.content);
  const auto edits = parse_edits(list_field(payload, "edits"), summary.sentences.size(), "redundancy");

  Summary out = summary;
  out.sentences.clear();
  for (const SummarySentence& sentence : summary.sentences) {
    const auto edit = edits.find(sentence.index);
    if (edit == edits.end()) {
      out.sentences.push_back(sentence);
    } else if (!edit->second.remove) {
      SummarySentence revised = sentence;
      if (revised.text != edit->second.text) {
        revised.text = edit->second.text;
        revised.origin = SentenceOrigin::Refined;
      }
      out.sentences.push_back(std::move(revised));
    }
  }
  reindex(out);
  return out;
}

}  // namespace refine_loop
