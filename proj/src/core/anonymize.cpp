#include "refine_loop/core/anonymize.hpp"

#include <regex>

#include <nlohmann/json.hpp>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/io.hpp"
#include "refine_loop/core/text.hpp"

namespace refine_loop {
namespace {

const std::regex& placeholder_regex() {
  static const std::regex re(R"(\[(?:REDACTED_[A-Z0-9_]+|SPEAKER_[0-9]+)\])");
  return re;
}

const std::regex& email_regex() {
  static const std::regex re(R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})");
  return re;
}

const std::regex& digit_run_regex() {
  static const std::regex re(R"([0-9]{7,})");
  return re;
}

// Non-ASCII bytes count as word characters so names like "José" keep their
// boundaries intact.
bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) || c == '_';
}

std::string escape_regex(std::string_view literal) {
  static constexpr std::string_view kSpecial = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : literal) {
    if (kSpecial.find(c) != std::string_view::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::regex wildcard_regex(std::string_view pattern) {
  std::string re;
  std::size_t start = 0;
  while (true) {
    const std::size_t star = pattern.find('*', start);
    re += escape_regex(pattern.substr(start, star == std::string_view::npos ? std::string_view::npos : star - start));
    if (star == std::string_view::npos) break;
    re += R"(\S*)";
    start = star + 1;
  }
  return std::regex(re);
}

// Replaces matches of `re` in a placeholder-free segment. When
// `word_bounded`, a match must not be glued to neighbouring word bytes.
std::string replace_in_segment(const std::string& segment, const std::regex& re, const std::string& replacement,
                               bool word_bounded) {
  std::string out;
  std::size_t cursor = 0;
  std::size_t search_from = 0;
  std::smatch match;
  while (search_from <= segment.size()) {
    auto begin = segment.cbegin() + static_cast<std::ptrdiff_t>(search_from);
    if (!std::regex_search(begin, segment.cend(), match, re)) break;
    const std::size_t pos = search_from + static_cast<std::size_t>(match.position(0));
    const std::size_t len = static_cast<std::size_t>(match.length(0));
    const bool left_ok = pos == 0 || !is_word_byte(segment[pos - 1]) || !is_word_byte(segment[pos]);
    const bool right_ok = pos + len >= segment.size() || len == 0 || !is_word_byte(segment[pos + len]) ||
                          !is_word_byte(segment[pos + len - 1]);
    if (len == 0 || (word_bounded && !(left_ok && right_ok))) {
      search_from = pos + 1;
      continue;
    }
    out.append(segment, cursor, pos - cursor);
    out += replacement;
    cursor = pos + len;
    search_from = cursor;
  }
  out.append(segment, cursor, std::string::npos);
  return out;
}

// Applies one rewrite to every stretch of text between placeholders.
std::string rewrite_outside_placeholders(const std::string& text, const std::regex& re,
                                         const std::string& replacement, bool word_bounded) {
  std::string out;
  std::size_t cursor = 0;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), placeholder_regex()); it != std::sregex_iterator();
       ++it) {
    const auto pos = static_cast<std::size_t>(it->position(0));
    out += replace_in_segment(text.substr(cursor, pos - cursor), re, replacement, word_bounded);
    out += it->str(0);
    cursor = pos + static_cast<std::size_t>(it->length(0));
  }
  out += replace_in_segment(text.substr(cursor), re, replacement, word_bounded);
  return out;
}

}  // namespace

bool is_placeholder(std::string_view token) {
  return std::regex_match(token.begin(), token.end(), placeholder_regex());
}

void validate(const RedactionRuleSet& rules) {
  for (const RedactionRule& rule : rules.rules) {
    if (rule.pattern.empty() || rule.pattern.find_first_not_of('*') == std::string::npos) {
      raise(ErrorKind::InvalidValue, "redaction pattern must contain literal text");
    }
    if (!is_placeholder(rule.replacement)) {
      raise(ErrorKind::InvalidValue, "replacement '" + rule.replacement + "' is not a [REDACTED_*] or [SPEAKER_k] token");
    }
  }
  for (const auto& [name, placeholder] : rules.speaker_roster) {
    if (trim(name).empty()) raise(ErrorKind::InvalidValue, "roster contains an empty name");
    if (!is_placeholder(placeholder)) {
      raise(ErrorKind::InvalidValue, "roster placeholder '" + placeholder + "' is not a [REDACTED_*] or [SPEAKER_k] token");
    }
  }
}

RedactionRuleSet parse_rule_set(std::string_view document) {
  RedactionRuleSet rules;
  try {
    const auto object = nlohmann::json::parse(document);
    for (const auto& rule : object.value("rules", nlohmann::json::array())) {
      rules.rules.push_back({rule.at("pattern").get<std::string>(), rule.at("replacement").get<std::string>()});
    }
    for (const auto& [name, placeholder] : object.value("roster", nlohmann::json::object()).items()) {
      rules.speaker_roster[nfc(name)] = placeholder.get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::MalformedRecord, std::string("redaction rule set: ") + e.what());
  }
  validate(rules);
  return rules;
}

RedactionRuleSet load_rule_set(const std::filesystem::path& path) { return parse_rule_set(read_file(path)); }

RedactionRuleSet roster_from_dialogue(const Dialogue& dialogue) {
  RedactionRuleSet rules;
  int next = 1;
  for (const Turn& turn : dialogue.turns) {
    if (!rules.speaker_roster.contains(turn.speaker)) {
      rules.speaker_roster[turn.speaker] = "[SPEAKER_" + std::to_string(next++) + "]";
    }
  }
  return rules;
}

std::string anonymize_text(std::string_view text, const RedactionRuleSet& rules) {
  std::string out = nfc(text);
  for (const RedactionRule& rule : rules.rules) {
    out = rewrite_outside_placeholders(out, wildcard_regex(rule.pattern), rule.replacement, true);
  }
  // Longer names first so "Ann Lee" wins over "Ann".
  std::vector<std::pair<std::string, std::string>> roster(rules.speaker_roster.begin(), rules.speaker_roster.end());
  std::stable_sort(roster.begin(), roster.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  for (const auto& [name, placeholder] : roster) {
    out = rewrite_outside_placeholders(out, std::regex(escape_regex(name)), placeholder, true);
  }
  out = rewrite_outside_placeholders(out, email_regex(), "[REDACTED_EMAIL]", false);
  out = rewrite_outside_placeholders(out, digit_run_regex(), "[REDACTED_NUMBER]", false);
  return out;
}

Dialogue anonymize(const Dialogue& dialogue, const RedactionRuleSet& rules) {
  validate(rules);
  Dialogue out = dialogue;
  for (Turn& turn : out.turns) turn.text = anonymize_text(turn.text, rules);
  return out;
}

}  // namespace refine_loop
