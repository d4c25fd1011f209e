#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "refine_loop/agents/prompt.hpp"
#include "refine_loop/core/model.hpp"
#include "refine_loop/llm/gateway.hpp"

namespace refine_loop {

/// Everything an agent needs to place a call: the backend, the trace the
/// call lands in, and decoding parameters.
struct LlmHandle {
  BackendPtr backend;
  std::shared_ptr<TraceLog> trace = std::make_shared<TraceLog>();
  RetryPolicy policy{};
  double temperature = 0.0;
  std::optional<ReasoningLevel> reasoning_level;
  std::optional<std::int64_t> seed;
  std::string model_id;
  int max_tokens = 2048;
};

// Renders the template, sends system+user messages tagged with the template's
// role, the given round and the template version. `follow_up` messages are
// appended after the rendered user message.
ChatResponse call_agent(const LlmHandle& llm, const PromptTemplate& prompt, const Bindings& bindings, int round,
                        std::span<const ChatMessage> follow_up = {});

// "[i] Speaker: text" per turn.
std::string format_dialogue(const Dialogue& dialogue);
// "[i] sentence" per sentence.
std::string format_summary(const Summary& summary);

/// Evaluator output for one sentence, or for a missing fact when
/// `sentence_index` is empty (Completeness only, always a fail).
struct SentenceFeedback {
  Dimension dimension = Dimension::Accuracy;
  std::optional<std::size_t> sentence_index;
  Label label = Label::Pass;
  std::string explanation;
  // Filled in as pass because the evaluator said nothing about the sentence.
  bool defaulted = false;

  bool is_missing() const noexcept { return !sentence_index.has_value(); }
  bool operator==(const SentenceFeedback&) const = default;
};

struct EvaluationReport {
  int round = 0;
  std::vector<SentenceFeedback> feedback;

  std::size_t fail_count() const noexcept;
  std::size_t missing_count() const noexcept;
  // No fail labels and no missing facts.
  bool clean() const noexcept { return fail_count() == 0 && missing_count() == 0; }
  std::vector<SentenceFeedback> for_dimension(Dimension dimension) const;
  std::vector<SentenceFeedback> missing_facts() const;
  bool sentence_failed(std::size_t index) const noexcept;
};

nlohmann::ordered_json report_to_json(const EvaluationReport& report);

/// Concatenates per-dimension feedback in canonical Dimension order,
/// regardless of the order the lists are supplied in.
EvaluationReport merge_reports(int round, std::vector<std::vector<SentenceFeedback>> per_dimension);

/// Drafting agent. Splits the reply into sentences (origin draft, round 0).
/// Throws EmptyDraft when the reply has no sentences.
Summary draft(const Dialogue& dialogue, const PromptTemplate& prompt, const LlmHandle& llm);

/// Turns a free-text reply into a Summary; shared by draft and the
/// single-call baseline.
Summary summary_from_reply(const std::string& dialogue_id, const std::string& reply, SentenceOrigin origin);

/// One evaluator agent. Reply schema: [{"sentence_index": int | "MISSING",
/// "label": "pass" | "fail", "explanation": string}] (or {"feedback": [...]}).
/// Returns exactly one non-MISSING item per sentence, sorted by index, then
/// the MISSING items. Out-of-range, duplicate and misplaced MISSING items are
/// dropped and logged. Sentences the reply skips default to pass.
std::vector<SentenceFeedback> evaluate_dimension(const Dialogue& dialogue, const Summary& summary, Dimension dimension,
                                                 const PromptTemplate& prompt, const LlmHandle& llm);

// Parses an evaluator reply against a summary of `sentence_count` sentences.
std::vector<SentenceFeedback> parse_feedback(const std::string& reply, Dimension dimension,
                                             std::size_t sentence_count);

enum class RefineDirective { Delete, FixAccuracy, FixReadability };

// Deletion (superfluous, i.e. a Completeness fail) > accuracy > readability.
std::optional<RefineDirective> refine_directive(const EvaluationReport& report, std::size_t sentence_index);

// Feedback block handed to the refinement agent: failed sentences with their
// directive and explanations in canonical order, then numbered missing facts.
std::string format_feedback(const Summary& summary, const EvaluationReport& report);

/// Refinement agent. Reply schema:
///   {"edits": [{"sentence_index", "action": "replace" | "delete", "text"}],
///    "insertions": [{"missing_index", "text", "after"?}]}
/// Sentences without a fail label come back byte-identical: edits to them are
/// logged as contract violations and discarded. Each missing fact yields at
/// most one inserted sentence. revision_round is incremented. An empty report
/// makes no LLM call.
Summary refine(const Dialogue& dialogue, const Summary& summary, const EvaluationReport& report,
               const PromptTemplate& prompt, const LlmHandle& llm);

/// Redundancy checker. Reply schema {"edits": [{"sentence_index", "action":
/// "replace" | "delete", "text"}]}; an empty edit list means no change. It can
/// reword or delete sentences but never add any.
Summary check_redundancy(const Summary& summary, const PromptTemplate& prompt, const LlmHandle& llm);

}  // namespace refine_loop
