#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace refine_loop {

struct Turn {
  std::size_t index = 0;
  std::string speaker;
  std::string text;
  std::optional<std::int64_t> start_ms;
  std::optional<std::int64_t> end_ms;

  bool operator==(const Turn&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Turn> turns;
  std::set<std::string> speakers;

  bool operator==(const Dialogue&) const = default;
};

/// Builds a validated dialogue: texts and speakers are NFC-normalized, the
/// speaker set is derived from the turns, and turn invariants are checked.
/// Throws EmptyDialogue, MalformedRecord or NonContiguousIndex.
Dialogue make_dialogue(std::string id, std::vector<Turn> turns);

void validate(const Dialogue& dialogue);

enum class SentenceOrigin { Draft, Refined, Inserted };

std::string_view to_string(SentenceOrigin origin) noexcept;
SentenceOrigin parse_origin(std::string_view text);

struct SummarySentence {
  std::size_t index = 0;
  std::string text;
  std::vector<std::size_t> attributions;
  SentenceOrigin origin = SentenceOrigin::Draft;

  bool operator==(const SummarySentence&) const = default;
};

struct Summary {
  std::string dialogue_id;
  std::vector<SummarySentence> sentences;
  int revision_round = 0;

  bool operator==(const Summary&) const = default;
};

Summary make_summary(std::string dialogue_id, const std::vector<std::string>& texts,
                     SentenceOrigin origin = SentenceOrigin::Draft, int revision_round = 0);

// Renumbers sentence indices to 0..n-1 in their current order.
void reindex(Summary& summary);

// Contiguity, non-empty text, non-negative round.
void validate(const Summary& summary);
// Additionally checks every attribution against the dialogue's turns.
void validate(const Summary& summary, const Dialogue& dialogue);

std::string summary_text(const Summary& summary);

enum class Dimension { Accuracy, Completeness, Readability };

inline constexpr std::array<Dimension, 3> kAllDimensions = {
    Dimension::Accuracy, Dimension::Completeness, Dimension::Readability};

std::string_view to_string(Dimension dimension) noexcept;
// Accepts "Accuracy", "accuracy", "A" (and likewise for the others).
Dimension parse_dimension(std::string_view text);

inline constexpr std::size_t index_of(Dimension dimension) noexcept {
  return static_cast<std::size_t>(dimension);
}

/// Subset of dimensions, iterated in canonical order.
class DimensionMask {
 public:
  constexpr DimensionMask() = default;

  static constexpr DimensionMask all() noexcept { return DimensionMask(0b111); }
  static constexpr DimensionMask none() noexcept { return DimensionMask(0); }
  static DimensionMask of(std::initializer_list<Dimension> dims) noexcept;
  // "all" / "full", a comma list ("A,C", "accuracy,readability"), or an
  // exclusion ("-A", "-E_C").
  static DimensionMask parse(std::string_view text);

  constexpr bool contains(Dimension d) const noexcept { return (bits_ >> index_of(d)) & 1U; }
  constexpr std::size_t size() const noexcept {
    return ((bits_ >> 0) & 1U) + ((bits_ >> 1) & 1U) + ((bits_ >> 2) & 1U);
  }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  DimensionMask without(Dimension d) const noexcept;
  std::vector<Dimension> dimensions() const;
  // "full", "-E_A", ... or "A+C" for other subsets.
  std::string label() const;

  bool operator==(const DimensionMask&) const = default;

 private:
  constexpr explicit DimensionMask(unsigned bits) : bits_(bits) {}
  unsigned bits_ = 0b111;
};

enum class Label { Pass, Fail };

std::string_view to_string(Label label) noexcept;
Label parse_label(std::string_view text);

}  // namespace refine_loop
