#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "refine_loop/autoeval/autoeval.hpp"
#include "refine_loop/pipeline/orchestrator.hpp"

namespace refine_loop::harness {

struct JudgeSetup {
  PromptTemplate prompt;
  LlmHandle llm;
  int k = 3;
};

struct ScoreRow {
  std::string label;
  // Corpus mean and std over judge runs, indexed by Dimension.
  std::array<MeanStd, 3> cells{};
  // Per dialogue, in input order.
  std::vector<std::size_t> calls;
  std::vector<std::size_t> expected_calls;
  std::vector<Summary> drafts;
  std::vector<Summary> finals;
  std::vector<DimensionScores> scores;
};

/// Rows by configuration, columns Accuracy, Completeness, Readability.
struct ScoreTable {
  std::vector<ScoreRow> rows;

  nlohmann::ordered_json to_json() const;
  // "mean ± std" cells with two decimals.
  std::string to_table(std::string_view first_column = "System") const;
};

/// Evaluator ablation: the pipeline runs on every dialogue once per mask,
/// then each final summary is judged k times. `masks` must include the full
/// mask. Each pipeline run keeps its own trace so call counts are per
/// dialogue.
ScoreTable run_ablation(std::span<const Dialogue> dialogues, const PipelineConfig& config,
                        std::span<const DimensionMask> masks, const AgentBackends& backends,
                        const PromptLibrary& prompts, const JudgeSetup& judge, std::size_t jobs = 1);

struct BackendVariant {
  std::string label;
  BackendPtr backend;
  std::optional<ReasoningLevel> reasoning_level;
};

/// Same prompts and config on every backend variant; needs at least two.
ScoreTable run_backend_matrix(std::span<const Dialogue> dialogues, const PipelineConfig& config,
                              std::span<const BackendVariant> variants, const PromptLibrary& prompts,
                              const JudgeSetup& judge, std::size_t jobs = 1);

}  // namespace refine_loop::harness
