#include "refine_loop/harness/experiments.hpp"

#include <algorithm>
#include <cstdio>

#include "refine_loop/core/error.hpp"
#include "refine_loop/harness/parallel.hpp"

namespace refine_loop::harness {
namespace {

struct RunOutcome {
  PipelineResult result;
  DimensionScores scores;
};

ScoreRow run_row(std::string label, std::span<const Dialogue> dialogues, const PipelineConfig& config,
                 const AgentBackends& backends, const PromptLibrary& prompts, const JudgeSetup& judge,
                 std::size_t jobs) {
  if (dialogues.empty()) raise(ErrorKind::EmptyInput, "no dialogues to run");
  auto outcomes = parallel_map(dialogues.size(), jobs, [&](std::size_t i) {
    RunOutcome outcome;
    outcome.result = run_pipeline(dialogues[i], config, backends, prompts, std::make_shared<TraceLog>());
    outcome.scores = judge_summary(dialogues[i], outcome.result.final_summary, judge.prompt, judge.llm, judge.k);
    return outcome;
  });
  ScoreRow row;
  row.label = std::move(label);
  for (const RunOutcome& outcome : outcomes) {
    row.calls.push_back(outcome.result.trace->size());
    row.expected_calls.push_back(expected_call_count(outcome.result, config.evaluator_mask));
    row.drafts.push_back(outcome.result.draft);
    row.finals.push_back(outcome.result.final_summary);
    row.scores.push_back(outcome.scores);
  }
  row.cells = corpus_scores(row.scores);
  return row;
}

}  // namespace

nlohmann::ordered_json ScoreTable::to_json() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const ScoreRow& row : rows) {
    nlohmann::ordered_json entry;
    entry["row"] = row.label;
    for (Dimension d : kAllDimensions) {
      const MeanStd& cell = row.cells[index_of(d)];
      entry[std::string(to_string(d))] = {{"mean", cell.mean}, {"std", cell.std}};
    }
    entry["llm_calls"] = row.calls;
    entry["expected_llm_calls"] = row.expected_calls;
    out.push_back(std::move(entry));
  }
  return out;
}

std::string ScoreTable::to_table(std::string_view first_column) const {
  std::size_t width = first_column.size();
  for (const ScoreRow& row : rows) width = std::max(width, row.label.size());
  char cell[64];
  std::string out(first_column);
  out.append(width - first_column.size() + 2, ' ');
  for (Dimension d : kAllDimensions) {
    std::snprintf(cell, sizeof cell, "%-16s", std::string(to_string(d)).c_str());
    out += cell;
  }
  out += "\n";
  for (const ScoreRow& row : rows) {
    out += row.label;
    out.append(width - row.label.size() + 2, ' ');
    for (const MeanStd& value : row.cells) {
      std::snprintf(cell, sizeof cell, "%.2f \xC2\xB1 %.2f     ", value.mean, value.std);
      out += cell;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += "\n";
  }
  return out;
}

ScoreTable run_ablation(std::span<const Dialogue> dialogues, const PipelineConfig& config,
                        std::span<const DimensionMask> masks, const AgentBackends& backends,
                        const PromptLibrary& prompts, const JudgeSetup& judge, std::size_t jobs) {
  if (std::find(masks.begin(), masks.end(), DimensionMask::all()) == masks.end()) {
    raise(ErrorKind::InvalidValue, "ablation masks must include the full mask");
  }
  ScoreTable table;
  for (const DimensionMask& mask : masks) {
    PipelineConfig masked = config;
    masked.evaluator_mask = mask;
    masked.draft_only = mask.empty();
    table.rows.push_back(run_row(mask.label(), dialogues, masked, backends, prompts, judge, jobs));
  }
  return table;
}

ScoreTable run_backend_matrix(std::span<const Dialogue> dialogues, const PipelineConfig& config,
                              std::span<const BackendVariant> variants, const PromptLibrary& prompts,
                              const JudgeSetup& judge, std::size_t jobs) {
  if (variants.size() < 2) raise(ErrorKind::InvalidValue, "a backend matrix needs at least two entries");
  ScoreTable table;
  for (const BackendVariant& variant : variants) {
    if (!variant.backend) raise(ErrorKind::InvalidConfig, "backend variant '" + variant.label + "' has no backend");
    PipelineConfig run = config;
    run.backend_id = variant.backend->id();
    run.reasoning_level = variant.reasoning_level;
    table.rows.push_back(run_row(variant.label, dialogues, run, AgentBackends(variant.backend), prompts, judge, jobs));
  }
  return table;
}

}  // namespace refine_loop::harness
