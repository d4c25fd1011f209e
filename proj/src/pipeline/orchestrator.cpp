#include "refine_loop/pipeline/orchestrator.hpp"

#include <future>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/io.hpp"

namespace refine_loop {
namespace {

std::string role_name(AgentRole role) { return std::string(to_string(role)); }

}  // namespace

void validate(const PipelineConfig& config) {
  if (config.n_rounds < 1) raise(ErrorKind::InvalidConfig, "n_rounds must be at least 1");
  if (config.draft_only && !config.evaluator_mask.empty()) {
    raise(ErrorKind::InvalidConfig, "draft-only mode needs an empty evaluator mask");
  }
  if (!config.draft_only && config.evaluator_mask.empty()) {
    raise(ErrorKind::InvalidConfig, "evaluator mask is empty; enable draft_only to run without evaluators");
  }
  if (config.max_tokens <= 0) raise(ErrorKind::InvalidConfig, "max_tokens must be positive");
  for (const auto& [role, temperature] : config.temperatures) {
    parse_agent_role(role);
    if (temperature < 0.0) raise(ErrorKind::InvalidConfig, "temperature for " + role + " is negative");
  }
  for (const auto& entry : config.prompt_versions) parse_agent_role(entry.first);
  validate(config.retry);
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& object) {
  PipelineConfig config;
  if (object.is_null()) return config;
  if (!object.is_object()) raise(ErrorKind::InvalidConfig, "pipeline config must be an object");
  try {
    config.n_rounds = object.value("n_rounds", config.n_rounds);
    config.backend_id = object.value("backend_id", config.backend_id);
    config.prompt_versions = object.value("prompt_versions", config.prompt_versions);
    config.temperatures = object.value("temperatures", config.temperatures);
    config.draft_only = object.value("draft_only", config.draft_only);
    if (object.contains("evaluator_mask")) {
      config.evaluator_mask = DimensionMask::parse(object["evaluator_mask"].get<std::string>());
    } else if (config.draft_only) {
      config.evaluator_mask = DimensionMask::none();
    }
    if (object.contains("reasoning_level") && !object["reasoning_level"].is_null()) {
      config.reasoning_level = parse_reasoning_level(object["reasoning_level"].get<std::string>());
    }
    if (object.contains("seed") && !object["seed"].is_null()) config.seed = object["seed"].get<std::int64_t>();
    config.max_tokens = object.value("max_tokens", config.max_tokens);
    config.model_id = object.value("model_id", config.model_id);
    if (object.contains("retry")) {
      const auto& retry = object["retry"];
      config.retry.max_attempts = retry.value("max_attempts", config.retry.max_attempts);
      config.retry.base_backoff_ms = retry.value("base_backoff_ms", config.retry.base_backoff_ms);
      config.retry.backoff_multiplier = retry.value("backoff_multiplier", config.retry.backoff_multiplier);
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::InvalidConfig, std::string("pipeline config: ") + e.what());
  }
  return config;
}

nlohmann::ordered_json to_json(const PipelineConfig& config) {
  nlohmann::ordered_json out;
  out["n_rounds"] = config.n_rounds;
  out["backend_id"] = config.backend_id;
  out["prompt_versions"] = config.prompt_versions;
  out["temperatures"] = config.temperatures;
  out["evaluator_mask"] = config.evaluator_mask.label();
  out["draft_only"] = config.draft_only;
  out["reasoning_level"] = config.reasoning_level ? nlohmann::ordered_json(to_string(*config.reasoning_level))
                                                  : nlohmann::ordered_json(nullptr);
  out["seed"] = config.seed ? nlohmann::ordered_json(*config.seed) : nlohmann::ordered_json(nullptr);
  out["max_tokens"] = config.max_tokens;
  out["model_id"] = config.model_id;
  out["retry"] = {{"max_attempts", config.retry.max_attempts},
                  {"base_backoff_ms", config.retry.base_backoff_ms},
                  {"backoff_multiplier", config.retry.backoff_multiplier}};
  return out;
}

BackendPtr AgentBackends::for_role(AgentRole role) const {
  if (const auto it = overrides.find(role_name(role)); it != overrides.end()) return it->second;
  if (!fallback) raise(ErrorKind::InvalidConfig, "no backend for role " + role_name(role));
  return fallback;
}

const PromptTemplate& prompt_for(const PromptLibrary& prompts, const PipelineConfig& config, AgentRole role) {
  const std::string name = role_name(role);
  const auto version = config.prompt_versions.find(name);
  const PromptTemplate& prompt =
      prompts.get(name, version == config.prompt_versions.end() ? std::string_view{} : version->second);
  if (prompt.role != role) {
    raise(ErrorKind::InvalidConfig, "template '" + name + "' declares role " + role_name(prompt.role));
  }
  return prompt;
}

LlmHandle handle_for(const PipelineConfig& config, const AgentBackends& backends, AgentRole role,
                     std::shared_ptr<TraceLog> trace) {
  LlmHandle handle;
  handle.backend = backends.for_role(role);
  handle.trace = std::move(trace);
  handle.policy = config.retry;
  if (const auto it = config.temperatures.find(role_name(role)); it != config.temperatures.end()) {
    handle.temperature = it->second;
  }
  handle.reasoning_level = config.reasoning_level;
  handle.seed = config.seed;
  handle.model_id = config.model_id;
  handle.max_tokens = config.max_tokens;
  return handle;
}

PipelineResult run_pipeline(const Dialogue& dialogue, const PipelineConfig& config, const AgentBackends& backends,
                            const PromptLibrary& prompts, std::shared_ptr<TraceLog> trace) {
  validate(config);
  PipelineResult result;
  result.trace = trace ? std::move(trace) : std::make_shared<TraceLog>();
  auto handle = [&](AgentRole role) { return handle_for(config, backends, role, result.trace); };

  try {
    result.draft = draft(dialogue, prompt_for(prompts, config, AgentRole::Draft), handle(AgentRole::Draft));
  } catch (const Error& e) {
    raise(ErrorKind::DraftFailed, e.what());
  }
  result.final_summary = result.draft;
  if (config.draft_only) return result;

  // Resolve every template up front so a missing one fails before any evaluation.
  const PromptTemplate& refine_prompt = prompt_for(prompts, config, AgentRole::Refine);
  const PromptTemplate& redundancy_prompt = prompt_for(prompts, config, AgentRole::Redundancy);
  std::vector<std::pair<Dimension, const PromptTemplate*>> evaluators;
  for (Dimension dimension : config.evaluator_mask.dimensions()) {
    evaluators.emplace_back(dimension, &prompt_for(prompts, config, evaluator_role(dimension)));
  }

  Summary current = result.draft;
  for (int round = 1; round <= config.n_rounds; ++round) {
    std::vector<std::future<std::vector<SentenceFeedback>>> pending;
    for (const auto& [dimension, prompt] : evaluators) {
      pending.push_back(std::async(std::launch::async, [&, dimension = dimension, prompt = prompt] {
        return evaluate_dimension(dialogue, current, dimension, *prompt, handle(evaluator_role(dimension)));
      }));
    }
    std::vector<std::vector<SentenceFeedback>> per_dimension;
    std::exception_ptr failure;
    for (auto& future : pending) {
      try {
        per_dimension.push_back(future.get());
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);

    RoundRecord record;
    record.report = merge_reports(round, std::move(per_dimension));
    result.rounds_executed = round;
    if (record.report.clean()) {
      result.per_round.push_back(std::move(record));
      result.terminated_early = true;
      break;
    }
    record.refined = refine(dialogue, current, record.report, refine_prompt, handle(AgentRole::Refine));
    record.deduplicated = check_redundancy(*record.refined, redundancy_prompt, handle(AgentRole::Redundancy));
    current = *record.deduplicated;
    result.per_round.push_back(std::move(record));
  }
  result.final_summary = current;
  return result;
}

Summary run_monolithic(const Dialogue& dialogue, const PromptTemplate& prompt, const LlmHandle& llm) {
  const ChatResponse response = call_agent(llm, prompt, {{"dialogue", format_dialogue(dialogue)}}, 0);
  return summary_from_reply(dialogue.id, response.content, SentenceOrigin::Draft);
}

std::size_t expected_call_count(const PipelineResult& result, DimensionMask mask) {
  std::size_t calls = 1;
  for (const RoundRecord& record : result.per_round) {
    calls += mask.size() + (record.report.clean() ? 0 : 2);
  }
  return calls;
}

void write_result_bundle(const std::filesystem::path& directory, const PipelineResult& result) {
  write_file(directory / "draft.json", serialize_summary(result.draft));
  for (std::size_t i = 0; i < result.per_round.size(); ++i) {
    const RoundRecord& record = result.per_round[i];
    const auto round_dir = directory / ("round_" + std::to_string(i + 1));
    write_file(round_dir / "report.json", report_to_json(record.report).dump(2) + "\n");
    if (record.refined) write_file(round_dir / "refined.json", serialize_summary(*record.refined));
    if (record.deduplicated) write_file(round_dir / "deduplicated.json", serialize_summary(*record.deduplicated));
  }
  write_file(directory / "final_summary.json", serialize_summary(result.final_summary));
  nlohmann::ordered_json info;
  info["dialogue_id"] = result.final_summary.dialogue_id;
  info["rounds_executed"] = result.rounds_executed;
  info["terminated_early"] = result.terminated_early;
  info["llm_calls"] = result.trace ? result.trace->size() : 0;
  write_file(directory / "result.json", info.dump(2) + "\n");
  if (result.trace) write_file(directory / "trace.jsonl", result.trace->to_jsonl());
}

}  // namespace refine_loop
