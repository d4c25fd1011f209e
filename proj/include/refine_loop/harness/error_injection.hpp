#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "refine_loop/agents/agents.hpp"
#include "refine_loop/core/model.hpp"
#include "refine_loop/harness/rng.hpp"

namespace refine_loop::harness {

enum class ErrorRuleKind {
  EntitySwap,
  NegationFlip,
  FabricatedSentence,
  DropKeyFact,
  DuplicateSentence,
  TenseFlip,
  DemographicInsert,
};

std::string_view to_string(ErrorRuleKind kind) noexcept;
ErrorRuleKind parse_error_rule(std::string_view text);
// entity_swap, negation_flip, fabricated_sentence -> Accuracy;
// drop_key_fact -> Completeness; the rest -> Readability.
Dimension target_dimension(ErrorRuleKind kind) noexcept;

/// Params by kind: fabricated_sentence "text"; demographic_insert "descriptor".
struct ErrorRule {
  ErrorRuleKind kind = ErrorRuleKind::DuplicateSentence;
  std::map<std::string, std::string> params;

  Dimension target_dimension() const noexcept { return harness::target_dimension(kind); }
};

// One rule of each kind.
std::vector<ErrorRule> default_rules();
// "default" or a comma list of rule names.
std::vector<ErrorRule> parse_rules(std::string_view text);

struct AppliedError {
  ErrorRuleKind kind = ErrorRuleKind::DuplicateSentence;
  Dimension dimension = Dimension::Readability;
  // Position in the perturbed summary, or in the gold summary when `removed`.
  std::size_t sentence_index = 0;
  bool removed = false;
  std::string description;
};

struct ErrorManifest {
  std::vector<AppliedError> applied;
  std::uint64_t seed = 0;

  std::size_t count(Dimension dimension) const noexcept;
};

nlohmann::ordered_json manifest_to_json(const ErrorManifest& manifest);

/// Rewrites one sentence for a sentence-local rule (entity_swap,
/// negation_flip, tense_flip, demographic_insert). Returns nullopt when the
/// rule does not apply to the sentence.
using SentenceRewriter =
    std::function<std::optional<std::string>(const ErrorRule&, const std::string&, const Dialogue&, Rng&)>;

std::optional<std::string> rule_based_rewrite(const ErrorRule& rule, const std::string& sentence,
                                              const Dialogue& dialogue, Rng& rng);

/// Rewriter that asks a model (template role error_injector) to apply the
/// rule. The reply schema is {"text": "..."}; an empty or unchanged text
/// means the rule does not apply.
SentenceRewriter llm_rewriter(PromptTemplate prompt, LlmHandle llm);

/// Applies exactly `count` (1..3) rule applications chosen with a seeded
/// generator. An inapplicable rule is resampled; RuleInapplicable is thrown
/// only when no listed rule applies. Sentences already touched are not
/// modified again.
std::pair<Summary, ErrorManifest> inject_errors(const Summary& gold, const Dialogue& dialogue,
                                                const std::vector<ErrorRule>& rules, int count, std::uint64_t seed,
                                                const SentenceRewriter& rewriter = rule_based_rewrite);

}  // namespace refine_loop::harness
