#include "refine_loop/harness/error_injection.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/text.hpp"
#include "refine_loop/llm/structured.hpp"

namespace refine_loop::harness {
namespace {

constexpr std::array<std::pair<ErrorRuleKind, std::string_view>, 7> kRuleNames = {{
    {ErrorRuleKind::EntitySwap, "entity_swap"},
    {ErrorRuleKind::NegationFlip, "negation_flip"},
    {ErrorRuleKind::FabricatedSentence, "fabricated_sentence"},
    {ErrorRuleKind::DropKeyFact, "drop_key_fact"},
    {ErrorRuleKind::DuplicateSentence, "duplicate_sentence"},
    {ErrorRuleKind::TenseFlip, "tense_flip"},
    {ErrorRuleKind::DemographicInsert, "demographic_insert"},
}};

const std::vector<std::pair<std::string, std::string>> kRolePairs = {
    {"customer", "agent"}, {"caller", "representative"}, {"client", "consultant"}, {"buyer", "seller"}};

const std::vector<std::string> kDescriptors = {"a retired teacher in her sixties", "a young father of two",
                                               "a recent immigrant", "a college student", "a middle-aged veteran"};

std::string escape_regex(std::string_view text) {
  static const std::regex kSpecial(R"([.^$|()\[\]{}*+?\\])");
  return std::regex_replace(std::string(text), kSpecial, R"(\$&)");
}

std::string match_case(const std::string& original, std::string replacement) {
  if (!original.empty() && !replacement.empty() && std::isupper(static_cast<unsigned char>(original[0]))) {
    replacement[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replacement[0])));
  }
  return replacement;
}

bool mentions(const std::string& sentence, const std::string& word, bool icase = false) {
  const auto flags = icase ? std::regex::ECMAScript | std::regex::icase : std::regex::ECMAScript;
  return std::regex_search(sentence, std::regex("\\b" + escape_regex(word) + "\\b", flags));
}

// Replaces every whole-word occurrence of x by y and of y by x in one pass.
std::string swap_words(const std::string& sentence, const std::string& x, const std::string& y, bool icase) {
  const auto flags = icase ? std::regex::ECMAScript | std::regex::icase : std::regex::ECMAScript;
  const std::regex pattern("\\b(" + escape_regex(x) + "|" + escape_regex(y) + ")\\b", flags);
  std::string out;
  auto last = sentence.cbegin();
  for (std::sregex_iterator it(sentence.begin(), sentence.end(), pattern), end; it != end; ++it) {
    out.append(last, (*it)[0].first);
    const std::string found = it->str();
    const bool is_x = icase ? to_lower_ascii(found) == to_lower_ascii(x) : found == x;
    out += icase ? match_case(found, is_x ? y : x) : (is_x ? y : x);
    last = (*it)[0].second;
  }
  out.append(last, sentence.cend());
  return out;
}

std::optional<std::string> entity_swap(const std::string& sentence, const Dialogue& dialogue, Rng& rng) {
  const std::vector<std::string> speakers(dialogue.speakers.begin(), dialogue.speakers.end());
  std::vector<std::string> present;
  for (const auto& name : speakers) {
    if (mentions(sentence, name)) present.push_back(name);
  }
  if (!present.empty() && speakers.size() >= 2) {
    const std::string x = rng.pick(present);
    std::vector<std::string> others;
    std::copy_if(speakers.begin(), speakers.end(), std::back_inserter(others),
                 [&x](const std::string& s) { return s != x; });
    return swap_words(sentence, x, rng.pick(others), false);
  }
  for (const auto& [x, y] : kRolePairs) {
    if (mentions(sentence, x, true) || mentions(sentence, y, true)) return swap_words(sentence, x, y, true);
  }
  return std::nullopt;
}

std::optional<std::string> negation_flip(const std::string& sentence) {
  static const std::regex kAuxiliary(
      R"(\b(is|are|was|were|will|can|could|should|would|has|have|had|does|do|did)\b(?! not\b))", std::regex::icase);
  std::smatch m;
  if (std::regex_search(sentence, m, kAuxiliary)) {
    return m.prefix().str() + m.str() + " not" + m.suffix().str();
  }
  static const std::regex kPastVerb(R"(\b([a-z]{2,}ed)\b)");
  if (std::regex_search(sentence, m, kPastVerb)) {
    return m.prefix().str() + "never " + m.str() + m.suffix().str();
  }
  return std::nullopt;
}

std::optional<std::string> tense_flip(const std::string& sentence) {
  static const std::regex kPast(R"(\b(was|were|had)\b)", std::regex::icase);
  std::smatch m;
  if (std::regex_search(sentence, m, kPast)) {
    const std::string word = to_lower_ascii(m.str());
    const std::string present = word == "was" ? "is" : word == "were" ? "are" : "has";
    return m.prefix().str() + match_case(m.str(), present) + m.suffix().str();
  }
  static const std::regex kPastVerb(R"(\b([a-z]{2,}ed)\b)");
  if (std::regex_search(sentence, m, kPastVerb)) {
    return m.prefix().str() + "will have " + m.str() + m.suffix().str();
  }
  return std::nullopt;
}

std::string insert_after(const std::smatch& m, const std::string& descriptor) {
  const std::string suffix = m.suffix().str();
  const bool punctuated = !suffix.empty() && std::string_view(".,;:!?").find(suffix[0]) != std::string_view::npos;
  return m.prefix().str() + m.str() + ", " + descriptor + (punctuated ? "" : ",") + suffix;
}

std::optional<std::string> demographic_insert(const ErrorRule& rule, const std::string& sentence,
                                              const Dialogue& dialogue, Rng& rng) {
  const auto param = rule.params.find("descriptor");
  const std::string descriptor = param != rule.params.end() ? param->second : rng.pick(kDescriptors);
  std::smatch m;
  for (const auto& name : dialogue.speakers) {
    if (std::regex_search(sentence, m, std::regex("\\b" + escape_regex(name) + "\\b"))) {
      return insert_after(m, descriptor);
    }
  }
  static const std::regex kRoleNoun(R"(\bthe (customer|caller|agent|client|user|representative)\b)", std::regex::icase);
  if (std::regex_search(sentence, m, kRoleNoun)) return insert_after(m, descriptor);
  return std::nullopt;
}

std::string fabricated_text(const ErrorRule& rule, const Dialogue& dialogue, Rng& rng) {
  if (const auto it = rule.params.find("text"); it != rule.params.end()) return it->second;
  const std::vector<std::string> speakers(dialogue.speakers.begin(), dialogue.speakers.end());
  const std::string& who = rng.pick(speakers);
  const int amount = rng.between(2, 50) * 10;
  return who + " also agreed to a refund of $" + std::to_string(amount) + ".";
}

std::string_view instruction(ErrorRuleKind kind) {
  switch (kind) {
    case ErrorRuleKind::EntitySwap: return "Swap who did what so the sentence attributes an action to the wrong person.";
    case ErrorRuleKind::NegationFlip: return "Negate the main claim so the sentence contradicts the dialogue.";
    case ErrorRuleKind::TenseFlip: return "Change the verb tense so it no longer uses the past tense.";
    case ErrorRuleKind::DemographicInsert:
      return "Add an irrelevant demographic detail about a person mentioned in the sentence.";
    default: return "Introduce the error.";
  }
}

struct Slot {
  SummarySentence sentence;
  std::size_t uid = 0;
  bool touched = false;
};

}  // namespace

std::string_view to_string(ErrorRuleKind kind) noexcept {
  for (const auto& [k, name] : kRuleNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

ErrorRuleKind parse_error_rule(std::string_view text) {
  const std::string wanted = to_lower_ascii(trim(text));
  for (const auto& [k, name] : kRuleNames) {
    if (name == wanted) return k;
  }
  raise(ErrorKind::InvalidValue, "unknown error rule '" + std::string(text) + "'");
}

Dimension target_dimension(ErrorRuleKind kind) noexcept {
  switch (kind) {
    case ErrorRuleKind::EntitySwap:
    case ErrorRuleKind::NegationFlip:
    case ErrorRuleKind::FabricatedSentence: return Dimension::Accuracy;
    case ErrorRuleKind::DropKeyFact: return Dimension::Completeness;
    default: return Dimension::Readability;
  }
}

std::vector<ErrorRule> default_rules() {
  std::vector<ErrorRule> out;
  for (const auto& entry : kRuleNames) out.push_back({entry.first, {}});
  return out;
}

std::vector<ErrorRule> parse_rules(std::string_view text) {
  const std::string cleaned = to_lower_ascii(trim(text));
  if (cleaned.empty() || cleaned == "default" || cleaned == "all") return default_rules();
  std::vector<ErrorRule> out;
  std::size_t start = 0;
  while (start <= cleaned.size()) {
    const std::size_t comma = std::min(cleaned.find(',', start), cleaned.size());
    const std::string name = trim(std::string_view(cleaned).substr(start, comma - start));
    if (!name.empty()) out.push_back({parse_error_rule(name), {}});
    start = comma + 1;
  }
  if (out.empty()) raise(ErrorKind::InvalidValue, "no error rules listed");
  return out;
}

std::size_t ErrorManifest::count(Dimension dimension) const noexcept {
  return static_cast<std::size_t>(std::count_if(applied.begin(), applied.end(),
                                                 [dimension](const AppliedError& e) { return e.dimension == dimension; }));
}

nlohmann::ordered_json manifest_to_json(const ErrorManifest& manifest) {
  nlohmann::ordered_json out;
  out["seed"] = manifest.seed;
  out["applied"] = nlohmann::ordered_json::array();
  for (const AppliedError& e : manifest.applied) {
    out["applied"].push_back({{"kind", to_string(e.kind)},
                              {"dimension", to_string(e.dimension)},
                              {"sentence_index", e.sentence_index},
                              {"removed", e.removed},
                              {"description", e.description}});
  }
  return out;
}

std::optional<std::string> rule_based_rewrite(const ErrorRule& rule, const std::string& sentence,
                                              const Dialogue& dialogue, Rng& rng) {
  switch (rule.kind) {
    case ErrorRuleKind::EntitySwap: return entity_swap(sentence, dialogue, rng);
    case ErrorRuleKind::NegationFlip: return negation_flip(sentence);
    case ErrorRuleKind::TenseFlip: return tense_flip(sentence);
    case ErrorRuleKind::DemographicInsert: return demographic_insert(rule, sentence, dialogue, rng);
    default: return std::nullopt;
  }
}

SentenceRewriter llm_rewriter(PromptTemplate prompt, LlmHandle llm) {
  return [prompt = std::move(prompt), llm = std::move(llm)](const ErrorRule& rule, const std::string& sentence,
                                                           const Dialogue& dialogue,
                                                           Rng&) -> std::optional<std::string> {
    const ChatResponse response = call_agent(llm, prompt,
                                             {{"rule", std::string(to_string(rule.kind))},
                                              {"instruction", std::string(instruction(rule.kind))},
                                              {"sentence", sentence},
                                              {"dialogue", format_dialogue(dialogue)}},
                                             0);
    const StructuredRecord record = extract_structured(response, {{"text", FieldKind::Text, true}});
    std::string text = trim(record.text("text"));
    if (text.empty() || text == sentence) return std::nullopt;
    return text;
  };
}

std::pair<Summary, ErrorManifest> inject_errors(const Summary& gold, const Dialogue& dialogue,
                                                const std::vector<ErrorRule>& rules, int count, std::uint64_t seed,
                                                const SentenceRewriter& rewriter) {
  if (count < 1 || count > 3) raise(ErrorKind::InvalidValue, "error count must be between 1 and 3");
  if (gold.sentences.empty()) raise(ErrorKind::EmptyInput, "cannot perturb an empty summary");
  if (rules.empty()) raise(ErrorKind::InvalidValue, "no error rules given");

  Rng rng(seed);
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) slots.push_back({gold.sentences[i], i, false});
  std::size_t next_uid = slots.size();

  struct Pending {
    ErrorRuleKind kind;
    std::size_t uid;
    bool removed;
    std::string description;
  };
  std::vector<Pending> pending;

  auto untouched = [&slots] {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (!slots[i].touched) out.push_back(i);
    }
    return out;
  };

  auto try_rule = [&](const ErrorRule& rule) -> bool {
    std::vector<std::size_t> candidates = untouched();
    switch (rule.kind) {
      case ErrorRuleKind::FabricatedSentence: {
        const std::size_t at = rng.index(slots.size() + 1);
        SummarySentence sentence{0, fabricated_text(rule, dialogue, rng), {}, SentenceOrigin::Inserted};
        pending.push_back({rule.kind, next_uid, false, "fabricated: " + sentence.text});
        slots.insert(slots.begin() + static_cast<std::ptrdiff_t>(at), Slot{std::move(sentence), next_uid++, true});
        return true;
      }
      case ErrorRuleKind::DropKeyFact: {
        if (slots.size() <= 1 || candidates.empty()) return false;
        const std::size_t at = rng.pick(candidates);
        if (slots[at].uid >= gold.sentences.size()) return false;
        pending.push_back({rule.kind, slots[at].uid, true, "dropped: " + slots[at].sentence.text});
        slots.erase(slots.begin() + static_cast<std::ptrdiff_t>(at));
        return true;
      }
      case ErrorRuleKind::DuplicateSentence: {
        if (candidates.empty()) return false;
        const std::size_t at = rng.pick(candidates);
        slots[at].touched = true;
        Slot copy{slots[at].sentence, next_uid++, true};
        pending.push_back({rule.kind, copy.uid, false, "duplicated: " + copy.sentence.text});
        slots.insert(slots.begin() + static_cast<std::ptrdiff_t>(at + 1), std::move(copy));
        return true;
      }
      default: {
        rng.shuffle(candidates);
        for (std::size_t at : candidates) {
          const std::string before = slots[at].sentence.text;
          const auto rewritten = rewriter(rule, before, dialogue, rng);
          if (!rewritten || *rewritten == before) continue;
          slots[at].sentence.text = *rewritten;
          slots[at].touched = true;
          pending.push_back({rule.kind, slots[at].uid, false, before + " -> " + *rewritten});
          return true;
        }
        return false;
      }
    }
  };

  for (int n = 0; n < count; ++n) {
    std::vector<std::size_t> pool(rules.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    bool applied = false;
    while (!pool.empty() && !applied) {
      const std::size_t pick = rng.index(pool.size());
      applied = try_rule(rules[pool[pick]]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    if (!applied) {
      raise(ErrorKind::RuleInapplicable,
            "no listed rule applies to summary of " + gold.dialogue_id + " after " + std::to_string(n) + " errors");
    }
  }

  Summary out = gold;
  out.sentences.clear();
  for (const Slot& slot : slots) out.sentences.push_back(slot.sentence);
  reindex(out);

  ErrorManifest manifest;
  manifest.seed = seed;
  for (const Pending& p : pending) {
    AppliedError error{p.kind, target_dimension(p.kind), p.uid, p.removed, p.description};
    if (!p.removed) {
      const auto it = std::find_if(slots.begin(), slots.end(), [&p](const Slot& s) { return s.uid == p.uid; });
      error.sentence_index = static_cast<std::size_t>(it - slots.begin());
    }
    manifest.applied.push_back(std::move(error));
  }
  return {std::move(out), std::move(manifest)};
}

}  // namespace refine_loop::harness
