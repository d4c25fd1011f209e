#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "refine_loop/core/model.hpp"

namespace refine_loop {

// `pattern` is literal text where '*' matches any run of non-whitespace
// characters. Matches must start and end on word boundaries.
struct RedactionRule {
  std::string pattern;
  std::string replacement;

  bool operator==(const RedactionRule&) const = default;
};

/// Ordered redaction rules plus a roster mapping speaker names to role
/// placeholders. Placeholders look like [REDACTED_*] or [SPEAKER_k].
///
/// Document schema:
///   {"rules": [{"pattern": "Acme*", "replacement": "[REDACTED_ORG]"}],
///    "roster": {"Bob": "[SPEAKER_2]"}}
struct RedactionRuleSet {
  std::vector<RedactionRule> rules;
  std::map<std::string, std::string> speaker_roster;
};

bool is_placeholder(std::string_view token);
void validate(const RedactionRuleSet& rules);

RedactionRuleSet parse_rule_set(std::string_view document);
RedactionRuleSet load_rule_set(const std::filesystem::path& path);

// Roster assigning [SPEAKER_1], [SPEAKER_2], ... by first appearance.
RedactionRuleSet roster_from_dialogue(const Dialogue& dialogue);

/// Applies, in order: listed rules, roster names, email-shaped tokens
/// ([REDACTED_EMAIL]) and digit runs of length >= 7 ([REDACTED_NUMBER]).
/// Text inside existing placeholders is never rewritten, so the result is a
/// fixed point.
std::string anonymize_text(std::string_view text, const RedactionRuleSet& rules);

// Rewrites turn texts only; ids, speakers and timestamps are untouched.
Dialogue anonymize(const Dialogue& dialogue, const RedactionRuleSet& rules);

}  // namespace refine_loop
