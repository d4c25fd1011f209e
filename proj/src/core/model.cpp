#include "refine_loop/core/model.hpp"

#include <algorithm>
#include <cctype>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/text.hpp"

namespace refine_loop {

void validate(const Dialogue& dialogue) {
  if (dialogue.turns.empty()) raise(ErrorKind::EmptyDialogue, "dialogue '" + dialogue.id + "' has no turns");
  std::set<std::string> speakers;
  for (std::size_t i = 0; i < dialogue.turns.size(); ++i) {
    const Turn& turn = dialogue.turns[i];
    if (turn.index != i) {
      raise(ErrorKind::NonContiguousIndex,
            "turn at position " + std::to_string(i) + " has index " + std::to_string(turn.index));
    }
    if (turn.speaker.empty()) raise(ErrorKind::MalformedRecord, "turn " + std::to_string(i) + " has no speaker");
    if (trim(turn.text).empty()) raise(ErrorKind::MalformedRecord, "turn " + std::to_string(i) + " has empty text");
    if ((turn.start_ms && *turn.start_ms < 0) || (turn.end_ms && *turn.end_ms < 0)) {
      raise(ErrorKind::MalformedRecord, "turn " + std::to_string(i) + " has a negative timestamp");
    }
    if (turn.start_ms && turn.end_ms && *turn.end_ms < *turn.start_ms) {
      raise(ErrorKind::MalformedRecord, "turn " + std::to_string(i) + " ends before it starts");
    }
    speakers.insert(turn.speaker);
  }
  if (speakers != dialogue.speakers) {
    raise(ErrorKind::MalformedRecord, "speaker set does not match the speakers of the turns");
  }
}

Dialogue make_dialogue(std::string id, std::vector<Turn> turns) {
  Dialogue dialogue;
  dialogue.id = std::move(id);
  for (Turn& turn : turns) {
    turn.speaker = nfc(turn.speaker);
    turn.text = nfc(turn.text);
    dialogue.speakers.insert(turn.speaker);
  }
  dialogue.turns = std::move(turns);
  validate(dialogue);
  return dialogue;
}

std::string_view to_string(SentenceOrigin origin) noexcept {
  switch (origin) {
    case SentenceOrigin::Draft: return "draft";
    case SentenceOrigin::Refined: return "refined";
    case SentenceOrigin::Inserted: return "inserted";
  }
  return "draft";
}

SentenceOrigin parse_origin(std::string_view text) {
  if (text == "draft") return SentenceOrigin::Draft;
  if (text == "refined") return SentenceOrigin::Refined;
  if (text == "inserted") return SentenceOrigin::Inserted;
  raise(ErrorKind::MalformedRecord, "unknown sentence origin '" + std::string(text) + "'");
}

Summary make_summary(std::string dialogue_id, const std::vector<std::string>& texts, SentenceOrigin origin,
                     int revision_round) {
  Summary summary;
  summary.dialogue_id = std::move(dialogue_id);
  summary.revision_round = revision_round;
  summary.sentences.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    summary.sentences.push_back(SummarySentence{i, texts[i], {}, origin});
  }
  return summary;
}

void reindex(Summary& summary) {
  for (std::size_t i = 0; i < summary.sentences.size(); ++i) summary.sentences[i].index = i;
}

void validate(const Summary& summary) {
  if (summary.revision_round < 0) raise(ErrorKind::InvalidValue, "negative revision_round");
  for (std::size_t i = 0; i < summary.sentences.size(); ++i) {
    const SummarySentence& sentence = summary.sentences[i];
    if (sentence.index != i) {
      raise(ErrorKind::NonContiguousIndex,
            "sentence at position " + std::to_string(i) + " has index " + std::to_string(sentence.index));
    }
    if (trim(sentence.text).empty()) {
      raise(ErrorKind::MalformedRecord, "sentence " + std::to_string(i) + " has empty text");
    }
  }
}

void validate(const Summary& summary, const Dialogue& dialogue) {
  validate(summary);
  for (const SummarySentence& sentence : summary.sentences) {
    for (std::size_t turn : sentence.attributions) {
      if (turn >= dialogue.turns.size()) {
        raise(ErrorKind::InvalidTurnIndex, "sentence " + std::to_string(sentence.index) + " cites turn " +
                                               std::to_string(turn) + " of a " +
                                               std::to_string(dialogue.turns.size()) + "-turn dialogue");
      }
    }
  }
}

std::string summary_text(const Summary& summary) {
  std::string out;
  for (const SummarySentence& sentence : summary.sentences) {
    if (!out.empty()) out += ' ';
    out += sentence.text;
  }
  return out;
}

std::string_view to_string(Dimension dimension) noexcept {
  switch (dimension) {
    case Dimension::Accuracy: return "Accuracy";
    case Dimension::Completeness: return "Completeness";
    case Dimension::Readability: return "Readability";
  }
  return "Accuracy";
}

Dimension parse_dimension(std::string_view text) {
  const std::string lower = to_lower_ascii(trim(text));
  if (lower == "accuracy" || lower == "a" || lower == "e_a") return Dimension::Accuracy;
  if (lower == "completeness" || lower == "c" || lower == "e_c") return Dimension::Completeness;
  if (lower == "readability" || lower == "r" || lower == "e_r") return Dimension::Readability;
  raise(ErrorKind::InvalidValue, "unknown dimension '" + std::string(text) + "'");
}

DimensionMask DimensionMask::of(std::initializer_list<Dimension> dims) noexcept {
  unsigned bits = 0;
  for (Dimension d : dims) bits |= 1U << index_of(d);
  return DimensionMask(bits);
}

DimensionMask DimensionMask::parse(std::string_view text) {
  const std::string spec = to_lower_ascii(trim(text));
  if (spec == "all" || spec == "full") return all();
  if (spec == "none") return none();
  if (!spec.empty() && spec.front() == '-') {
    DimensionMask mask = all();
    std::string_view rest(spec);
    rest.remove_prefix(1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      std::size_t comma = rest.find(',', start);
      if (comma == std::string_view::npos) comma = rest.size();
      std::string_view item = rest.substr(start, comma - start);
      if (!item.empty() && item.front() == '-') item.remove_prefix(1);
      mask = mask.without(parse_dimension(item));
      start = comma + 1;
    }
    return mask;
  }
  unsigned bits = 0;
  std::size_t start = 0;
  while (start <= spec.size()) {
    std::size_t comma = spec.find_first_of(",+", start);
    if (comma == std::string::npos) comma = spec.size();
    bits |= 1U << index_of(parse_dimension(std::string_view(spec).substr(start, comma - start)));
    start = comma + 1;
  }
  return DimensionMask(bits);
}

DimensionMask DimensionMask::without(Dimension d) const noexcept {
  return DimensionMask(bits_ & ~(1U << index_of(d)));
}

std::vector<Dimension> DimensionMask::dimensions() const {
  std::vector<Dimension> out;
  for (Dimension d : kAllDimensions) {
    if (contains(d)) out.push_back(d);
  }
  return out;
}

std::string DimensionMask::label() const {
  if (*this == all()) return "full";
  if (size() == 2) {
    for (Dimension d : kAllDimensions) {
      if (!contains(d)) return std::string("-E_") + to_string(d).front();
    }
  }
  if (empty()) return "draft-only";
  std::string out;
  for (Dimension d : dimensions()) {
    if (!out.empty()) out += '+';
    out += to_string(d).front();
  }
  return out;
}

std::string_view to_string(Label label) noexcept { return label == Label::Pass ? "pass" : "fail"; }

Label parse_label(std::string_view text) {
  const std::string lower = to_lower_ascii(trim(text));
  if (lower == "pass") return Label::Pass;
  if (lower == "fail") return Label::Fail;
  raise(ErrorKind::WrongKind, "label must be 'pass' or 'fail', got '" + std::string(text) + "'");
}

}  // namespace refine_loop
