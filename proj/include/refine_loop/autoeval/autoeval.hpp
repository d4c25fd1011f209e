#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "refine_loop/agents/agents.hpp"
#include "refine_loop/core/model.hpp"

namespace refine_loop {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Sample standard deviation (n - 1); 0 for a single value. Throws EmptyInput.
MeanStd mean_std(std::span<const double> values);

struct DimensionRuns {
  std::vector<int> runs;
  std::vector<std::string> explanations;
  double mean = 0.0;
  double std = 0.0;
};

/// Judge scores for one summary: k runs per dimension, each in 1..5.
struct DimensionScores {
  std::array<DimensionRuns, 3> dims;

  const DimensionRuns& operator[](Dimension d) const { return dims[index_of(d)]; }
  DimensionRuns& operator[](Dimension d) { return dims[index_of(d)]; }
  std::array<double, 3> means() const;
};

/// One judge reply: {"accuracy": {"score": 4, "explanation": "..."}, ...}.
/// Flat integers ({"accuracy": 4, ...}) are accepted too.
struct JudgeReply {
  std::array<int, 3> scores{};
  std::array<std::string, 3> explanations;
};

// Throws ScoreOutOfRange for scores outside 1..5, MissingField, WrongKind.
JudgeReply parse_judge_reply(const std::string& reply);

// Fills mean/std from the runs.
DimensionScores aggregate_runs(std::span<const JudgeReply> replies);

/// k independent judge calls. A reply with an out-of-range score is re-asked
/// once; a second violation throws ScoreOutOfRange.
DimensionScores judge_summary(const Dialogue& dialogue, const Summary& summary, const PromptTemplate& prompt,
                              const LlmHandle& llm, int k = 3);

/// Corpus view of per-dialogue scores: the mean of the per-dialogue means,
/// and the spread of the k per-run corpus means. All inputs must share k.
std::array<MeanStd, 3> corpus_scores(std::span<const DimensionScores> scores);

nlohmann::ordered_json scores_to_json(const DimensionScores& scores);

enum class Winner { A, B, Tie };
std::string_view to_string(Winner winner) noexcept;

struct JudgeVerdict {
  Winner winner = Winner::Tie;
  // Picks mapped back to A/B: a shown first, then b shown first.
  Winner first_order = Winner::Tie;
  Winner second_order = Winner::Tie;
};

/// Pairwise comparison judged twice with the candidates swapped. The reply
/// schema is {"winner": "first" | "second" | "tie"}. Disagreement is a tie.
JudgeVerdict judge_compare(const Dialogue& dialogue, const Summary& a, const Summary& b, const PromptTemplate& prompt,
                           const LlmHandle& llm);

}  // namespace refine_loop
