#include "refine_loop/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/text.hpp"

namespace refine_loop::metrics {
namespace {

using Counter = std::map<std::string, std::size_t>;

Counter ngram_counts(const std::vector<std::string>& words, std::size_t n) {
  Counter out;
  if (words.size() < n) return out;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::string gram = words[i];
    for (std::size_t k = 1; k < n; ++k) gram += " " + words[i + k];
    ++out[gram];
  }
  return out;
}

double jaccard(const Counter& a, const Counter& b) {
  std::size_t inter = 0;
  std::size_t uni = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      uni += ia->second;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      uni += ib->second;
      ++ib;
    } else {
      inter += std::min(ia->second, ib->second);
      uni += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double similarity(const std::vector<std::string>& a, const std::vector<std::string>& b, std::size_t n) {
  const std::size_t order = (a.size() < n || b.size() < n) ? 1 : n;
  return jaccard(ngram_counts(a, order), ngram_counts(b, order));
}

void check_lengths(std::size_t predicted, std::size_t gold) {
  if (predicted != gold) {
    raise(ErrorKind::LengthMismatch,
          "predicted has " + std::to_string(predicted) + " items, gold has " + std::to_string(gold));
  }
  if (gold == 0) raise(ErrorKind::EmptyInput, "no items to compare");
}

}  // namespace

WerResult wer(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
  const std::size_t n = reference.size();
  const std::size_t m = hypothesis.size();
  if (n == 0) raise(ErrorKind::EmptyReference, "word error rate needs a non-empty reference");

  // dist[i][j]: edits turning reference[0..i) into hypothesis[0..j).
  std::vector<std::size_t> dist((n + 1) * (m + 1));
  auto at = [m, &dist](std::size_t i, std::size_t j) -> std::size_t& { return dist[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diagonal = at(i - 1, j - 1) + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      at(i, j) = std::min({diagonal, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  AlignmentCounts counts;
  counts.reference_len = n;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1)) {
      if (reference[i - 1] == hypothesis[j - 1]) {
        ++counts.hits;
      } else {
        ++counts.substitutions;
      }
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++counts.deletions;
      --i;
    } else {
      ++counts.insertions;
      --j;
    }
  }
  return {static_cast<double>(counts.errors()) / static_cast<double>(n), counts};
}

WerResult wer_text(std::string_view reference, std::string_view hypothesis) {
  const auto ref = tokenize_words(reference);
  const auto hyp = tokenize_words(hypothesis);
  return wer(ref, hyp);
}

bool is_stopword(std::string_view word) {
  static const std::set<std::string_view> kStopwords = {
      "a",     "about", "after", "again", "all",   "also",  "an",    "and",   "any",   "are",   "as",   "at",
      "be",    "been",  "before", "both", "but",   "by",    "can",   "could", "did",   "do",    "does", "for",
      "from",  "had",   "has",   "have",  "he",    "her",   "him",   "his",   "i",     "if",    "in",   "into",
      "is",    "it",    "its",   "more",  "my",    "no",    "not",   "of",    "on",    "or",    "our",  "she",
      "should", "so",   "some",  "than",  "that",  "the",   "their", "them",  "then",  "there", "they", "this",
      "to",    "up",    "was",   "we",    "were",  "what",  "which", "who",   "will",  "with",  "would", "you"};
  return kStopwords.contains(word);
}

double ngram_similarity(std::string_view a, std::string_view b, std::size_t n) {
  if (n == 0) raise(ErrorKind::InvalidValue, "n-gram order must be positive");
  return similarity(tokenize_words(a), tokenize_words(b), n);
}

RedundancyReport ngram_redundancy(const Summary& summary, std::size_t n, double threshold) {
  if (summary.sentences.empty()) raise(ErrorKind::EmptyInput, "redundancy check needs a non-empty summary");
  if (n == 0) raise(ErrorKind::InvalidValue, "n-gram order must be positive");
  if (!(threshold >= 0.0 && threshold <= 1.0)) raise(ErrorKind::InvalidValue, "threshold must lie in [0, 1]");

  std::vector<std::vector<std::string>> words;
  words.reserve(summary.sentences.size());
  for (const auto& sentence : summary.sentences) words.push_back(tokenize_words(sentence.text));

  RedundancyReport report;
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (std::size_t j = i + 1; j < words.size(); ++j) {
      const double sim = similarity(words[i], words[j], n);
      if (sim >= threshold) report.pairs.push_back({i, j, sim});
    }
  }

  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::size_t order = std::min(n, std::max<std::size_t>(words[i].size(), 1));
    std::string repeated;
    for (const auto& [gram, count] : ngram_counts(words[i], order)) {
      if (count >= 2) {
        repeated = gram;
        break;
      }
    }
    if (repeated.empty()) {
      for (const auto& [word, count] : ngram_counts(words[i], 1)) {
        if (count >= 2 && !is_stopword(word)) {
          repeated = word;
          break;
        }
      }
    }
    if (!repeated.empty()) report.intra.push_back({i, repeated});
  }
  return report;
}

double attribution_coverage(const Summary& summary) {
  if (summary.sentences.empty()) return 0.0;
  const auto grounded = std::count_if(summary.sentences.begin(), summary.sentences.end(),
                                      [](const SummarySentence& s) { return !s.attributions.empty(); });
  return static_cast<double>(grounded) / static_cast<double>(summary.sentences.size());
}

double mae(std::span<const double> predicted, std::span<const double> gold) {
  check_lengths(predicted.size(), gold.size());
  double total = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) total += std::abs(predicted[i] - gold[i]);
  return total / static_cast<double>(gold.size());
}

Interval wilson_interval(std::size_t successes, std::size_t n, double z) {
  if (n == 0) raise(ErrorKind::EmptyTally, "no observations");
  if (successes > n) raise(ErrorKind::InvalidValue, "successes exceed observations");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  Interval out{std::max(0.0, center - half), std::min(1.0, center + half)};
  // The exact interval always contains p; guard the endpoints against rounding.
  out.lo = std::min(out.lo, p);
  out.hi = std::max(out.hi, p);
  return out;
}

PreferenceRates preference_rates(const Tally& tally) {
  const std::size_t total = tally.total();
  if (total == 0) raise(ErrorKind::EmptyTally, "no preference records");
  const double n = static_cast<double>(total);
  PreferenceRates out;
  out.rate_a = static_cast<double>(tally.wins_a) / n;
  out.rate_b = static_cast<double>(tally.wins_b) / n;
  out.rate_tie = static_cast<double>(tally.ties) / n;
  out.wilson95_a = wilson_interval(tally.wins_a, total);
  return out;
}

ClassificationMetrics classification_metrics(std::span<const Label> predicted, std::span<const Label> gold) {
  check_lengths(predicted.size(), gold.size());
  ClassificationMetrics out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool pred_fail = predicted[i] == Label::Fail;
    const bool gold_fail = gold[i] == Label::Fail;
    if (pred_fail && gold_fail) ++out.true_positive;
    if (pred_fail && !gold_fail) ++out.false_positive;
    if (!pred_fail && !gold_fail) ++out.true_negative;
    if (!pred_fail && gold_fail) ++out.false_negative;
  }
  const double n = static_cast<double>(gold.size());
  out.accuracy = static_cast<double>(out.true_positive + out.true_negative) / n;
  const std::size_t predicted_fail = out.true_positive + out.false_positive;
  const std::size_t actual_fail = out.true_positive + out.false_negative;
  out.precision_degenerate = predicted_fail == 0;
  out.recall_degenerate = actual_fail == 0;
  out.precision = predicted_fail == 0 ? 1.0 : static_cast<double>(out.true_positive) / static_cast<double>(predicted_fail);
  out.recall = actual_fail == 0 ? 1.0 : static_cast<double>(out.true_positive) / static_cast<double>(actual_fail);
  const double sum = out.precision + out.recall;
  out.f1 = sum == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / sum;
  return out;
}

}  // namespace refine_loop::metrics
