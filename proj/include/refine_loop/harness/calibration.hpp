#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "refine_loop/agents/agents.hpp"
#include "refine_loop/core/model.hpp"
#include "refine_loop/metrics/metrics.hpp"

namespace refine_loop::harness {

struct CalibrationExample {
  std::string dialogue_id;
  std::size_t sentence_index = 0;
  Dimension dimension = Dimension::Accuracy;
  Label gold_label = Label::Pass;
};

struct CalibrationSet {
  std::map<std::string, std::pair<Dialogue, Summary>> items;
  std::vector<CalibrationExample> examples;
};

/// {"items": [{"dialogue": {"id", "turns"}, "summary": {...},
///   "labels": [{"sentence_index", "dimension", "gold_label"}]}]}
CalibrationSet parse_calibration_set(std::string_view document);
CalibrationSet load_calibration_set(const std::filesystem::path& path);

struct CalibrationOutcome {
  metrics::ClassificationMetrics metrics;
  std::vector<Label> predicted;
  std::vector<Label> gold;
};

/// Runs the evaluator once per dialogue referenced by `examples` (all of
/// dimension `dimension`) and scores its labels against the gold labels.
/// Throws MissingSentence when a gold example's sentence got no label from
/// the evaluator, UnknownDialogue for an id missing from `items`.
CalibrationOutcome run_calibration(std::span<const CalibrationExample> examples, Dimension dimension,
                                   const std::map<std::string, std::pair<Dialogue, Summary>>& items,
                                   const PromptTemplate& prompt, const LlmHandle& llm);

}  // namespace refine_loop::harness
