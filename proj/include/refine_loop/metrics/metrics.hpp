#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "refine_loop/core/model.hpp"

namespace refine_loop::metrics {

struct AlignmentCounts {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t hits = 0;
  std::size_t reference_len = 0;

  std::size_t errors() const noexcept { return substitutions + insertions + deletions; }
  bool operator==(const AlignmentCounts&) const = default;
};

struct WerResult {
  double rate = 0.0;
  AlignmentCounts counts;
};

/// Word error rate under a unit-cost minimal edit alignment.
/// Throws EmptyReference when `reference` is empty.
WerResult wer(std::span<const std::string> reference, std::span<const std::string> hypothesis);
// Tokenizes both sides with tokenize_words first.
WerResult wer_text(std::string_view reference, std::string_view hypothesis);

struct PairFlag {
  std::size_t i = 0;
  std::size_t j = 0;
  double similarity = 0.0;
  bool operator==(const PairFlag&) const = default;
};

struct IntraFlag {
  std::size_t sentence = 0;
  // Space-joined n-gram (or single word) that repeats inside the sentence.
  std::string repeated;
  bool operator==(const IntraFlag&) const = default;
};

struct RedundancyReport {
  std::vector<PairFlag> pairs;  // i < j, lexicographic order
  std::vector<IntraFlag> intra;
  bool clean() const noexcept { return pairs.empty() && intra.empty(); }
};

// Jaccard similarity of the word n-gram multisets of two texts. Falls back to
// unigrams when either text has fewer than n words.
double ngram_similarity(std::string_view a, std::string_view b, std::size_t n = 3);

/// Deterministic repetition oracle. A pair is flagged when its similarity
/// reaches `threshold`. A sentence is flagged when one of its n-grams occurs
/// twice, or when a content word (not in the stopword list) occurs twice.
/// Throws EmptyInput for an empty summary, InvalidValue for a threshold
/// outside [0, 1] or n = 0.
RedundancyReport ngram_redundancy(const Summary& summary, std::size_t n = 3, double threshold = 0.6);

// Function words ignored by the repeated-word check.
bool is_stopword(std::string_view lowercase_word);

// Fraction of sentences with at least one attribution; 0 for an empty summary.
double attribution_coverage(const Summary& summary);

// Throws EmptyInput / LengthMismatch.
double mae(std::span<const double> predicted, std::span<const double> gold);

struct Tally {
  std::size_t wins_a = 0;
  std::size_t wins_b = 0;
  std::size_t ties = 0;

  std::size_t total() const noexcept { return wins_a + wins_b + ties; }
  bool operator==(const Tally&) const = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for `successes` out of `n`. Throws EmptyTally for n = 0.
Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.96);

struct PreferenceRates {
  double rate_a = 0.0;
  double rate_b = 0.0;
  double rate_tie = 0.0;
  Interval wilson95_a;
};

// Throws EmptyTally.
PreferenceRates preference_rates(const Tally& tally);

/// Binary metrics with fail as the positive class. Precision (recall) with no
/// predicted (actual) fails is defined as 1.0 and flagged degenerate.
struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_negative = 0;
  bool precision_degenerate = false;
  bool recall_degenerate = false;
};

// Throws EmptyInput / LengthMismatch.
ClassificationMetrics classification_metrics(std::span<const Label> predicted, std::span<const Label> gold);

}  // namespace refine_loop::metrics
