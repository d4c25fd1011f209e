#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "refine_loop/agents/agents.hpp"
#include "refine_loop/agents/prompt.hpp"
#include "refine_loop/core/model.hpp"
#include "refine_loop/llm/gateway.hpp"

namespace refine_loop {

struct PipelineConfig {
  int n_rounds = 2;
  std::string backend_id;
  // Template version per role id ("draft", "eval_accuracy", ...); empty means default.
  std::map<std::string, std::string> prompt_versions;
  // Decoding temperature per role id; unlisted roles use 0.
  std::map<std::string, double> temperatures;
  DimensionMask evaluator_mask = DimensionMask::all();
  // Draft only, no revision rounds. Requires an empty evaluator mask.
  bool draft_only = false;
  std::optional<ReasoningLevel> reasoning_level;
  std::optional<std::int64_t> seed;
  RetryPolicy retry;
  int max_tokens = 2048;
  std::string model_id;
};

// Throws InvalidConfig.
void validate(const PipelineConfig& config);

/// Reads the "pipeline" section of a config document. Keys mirror the
/// struct; "evaluator_mask" takes the DimensionMask::parse syntax.
PipelineConfig pipeline_config_from_json(const nlohmann::json& object);
nlohmann::ordered_json to_json(const PipelineConfig& config);

/// Backend per agent role id, with a fallback for unlisted roles.
struct AgentBackends {
  BackendPtr fallback;
  std::map<std::string, BackendPtr> overrides;

  AgentBackends() = default;
  AgentBackends(BackendPtr backend) : fallback(std::move(backend)) {}  // NOLINT(google-explicit-constructor)
  BackendPtr for_role(AgentRole role) const;
};

struct RoundRecord {
  EvaluationReport report;
  std::optional<Summary> refined;
  std::optional<Summary> deduplicated;
};

struct PipelineResult {
  Summary draft;
  Summary final_summary;
  int rounds_executed = 0;
  std::vector<RoundRecord> per_round;
  // The loop stopped on a clean report.
  bool terminated_early = false;
  std::shared_ptr<TraceLog> trace;
};

/// Draft once, then up to n_rounds of evaluation (masked evaluators run
/// concurrently), refinement and redundancy checking. A round whose merged
/// report is clean ends the loop without further calls. Draft failures are
/// reported as DraftFailed; later agent errors propagate. Calls land in
/// `trace` when given, so a partial trace survives an aborted run.
PipelineResult run_pipeline(const Dialogue& dialogue, const PipelineConfig& config, const AgentBackends& backends,
                            const PromptLibrary& prompts, std::shared_ptr<TraceLog> trace = nullptr);

/// Single-call baseline: one request, reply split into sentences.
Summary run_monolithic(const Dialogue& dialogue, const PromptTemplate& prompt, const LlmHandle& llm);

// 1 + sum over executed rounds of (|mask| + 2 if the round was unclean).
std::size_t expected_call_count(const PipelineResult& result, DimensionMask mask);

// Template lookup honoring config.prompt_versions.
const PromptTemplate& prompt_for(const PromptLibrary& prompts, const PipelineConfig& config, AgentRole role);

// Handle for `role` built from the config's decoding settings.
LlmHandle handle_for(const PipelineConfig& config, const AgentBackends& backends, AgentRole role,
                     std::shared_ptr<TraceLog> trace);

/// Writes draft.json, round_<r>/{report,refined,deduplicated}.json,
/// final_summary.json and trace.jsonl under `directory`.
void write_result_bundle(const std::filesystem::path& directory, const PipelineResult& result);

}  // namespace refine_loop
