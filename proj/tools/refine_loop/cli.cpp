#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "refine_loop/agents/agents.hpp"
#include "refine_loop/autoeval/autoeval.hpp"
#include "refine_loop/core/anonymize.hpp"
#include "refine_loop/core/error.hpp"
#include "refine_loop/core/io.hpp"
#include "refine_loop/core/text.hpp"
#include "refine_loop/harness/ab_pairs.hpp"
#include "refine_loop/harness/calibration.hpp"
#include "refine_loop/harness/experiments.hpp"
#include "refine_loop/harness/metaeval.hpp"
#include "refine_loop/harness/noise.hpp"
#include "refine_loop/harness/parallel.hpp"
#include "refine_loop/harness/synthetic.hpp"
#include "refine_loop/llm/registry.hpp"
#include "refine_loop/llm/scripted_backend.hpp"
#include "refine_loop/metrics/metrics.hpp"
#include "refine_loop/pipeline/orchestrator.hpp"
#include "refine_loop/service/server.hpp"

#ifndef REFINE_LOOP_DEFAULT_PROMPTS
#define REFINE_LOOP_DEFAULT_PROMPTS "prompts"
#endif

namespace refine_loop::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

struct Options {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;
  std::string backend;
  std::string script;
  std::string judge_script;
  std::string prompts;
  int n_rounds = 0;
  std::string mask;
  int judge_runs = 0;
  double target_wer = 0.0;
  bool dry_run = false;

  std::vector<std::string> dialogues;
  std::size_t synthetic = 0;
  std::string summary;
  std::string golds;
  std::string rules = "default";
  std::string judge = "llm";
  double perturb_fraction = 0.5;
  std::string data;
  std::string dimension = "accuracy";
  std::vector<std::string> masks;
  double disfluency_rate = 0.0;
  bool channel_merge = false;
  double merge_probability = 0.2;
  std::string ref;
  std::string hyp;
  bool monolithic = false;
  std::string redact;
  std::string a_dir;
  std::string b_dir;
  std::string experiment_id = "experiment";
  std::string system_a = "A";
  std::string system_b = "B";
  bool attribution_tasks = false;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  std::string experiment;
  std::vector<std::string> variants;
};

/// Everything a command needs after flags and config are merged.
class Context {
 public:
  Context(const Options& options, std::string command) : opt(options) {
    manifest["command"] = std::move(command);
    manifest["started_at"] = utc_timestamp();
    manifest["seeds"] = {{"seed", opt.seed}};
    manifest["dry_run"] = opt.dry_run;
    manifest["outputs"] = ordered_json::array();
    if (!opt.config.empty()) {
      const fs::path path(opt.config);
      try {
        config = json::parse(read_file(path));
      } catch (const json::exception& e) {
        raise(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
      }
      config_dir = path.parent_path();
    }
    pipeline = pipeline_config_from_json(config.value("pipeline", json()));
    if (opt.n_rounds > 0) pipeline.n_rounds = opt.n_rounds;
    if (!opt.mask.empty()) {
      pipeline.evaluator_mask = DimensionMask::parse(opt.mask);
      pipeline.draft_only = pipeline.evaluator_mask.empty();
    }
    pipeline.seed = static_cast<std::int64_t>(opt.seed);
    manifest["config"] = config;
  }

  fs::path resolve(const std::string& path) const {
    const fs::path p(path);
    return p.is_relative() && !config_dir.empty() ? config_dir / p : p;
  }

  const PromptLibrary& prompts() {
    if (!prompts_) {
      fs::path dir = REFINE_LOOP_DEFAULT_PROMPTS;
      if (!opt.prompts.empty()) {
        dir = opt.prompts;
      } else if (config.contains("prompts")) {
        dir = resolve(config["prompts"].get<std::string>());
      }
      prompts_ = PromptLibrary::load_directory(dir);
      ordered_json versions;
      for (const auto& name : prompts_->names()) versions[name] = prompts_->get(name).version;
      for (const auto& [role, version] : pipeline.prompt_versions) versions[role] = version;
      manifest["prompt_versions"] = versions;
    }
    return *prompts_;
  }

  BackendPtr backend() {
    if (!backend_) {
      backend_ = pick_backend(opt.script, opt.backend.empty() ? config.value("backend", std::string()) : opt.backend);
      pipeline.backend_id = backend_->id();
      manifest["backend_ids"]["pipeline"] = backend_->id();
    }
    return backend_;
  }

  BackendPtr judge_backend() {
    if (!judge_backend_) {
      const std::string id = config.value("judge_backend", std::string());
      if (opt.judge_script.empty() && id.empty()) {
        judge_backend_ = backend();
      } else {
        judge_backend_ = pick_backend(opt.judge_script, id);
      }
      manifest["backend_ids"]["judge"] = judge_backend_->id();
    }
    return judge_backend_;
  }

  BackendRegistry& registry() {
    if (!registry_) registry_ = registry_from_json(config.value("backends", json::object()), config_dir);
    return *registry_;
  }

  int judge_runs() const {
    if (opt.judge_runs > 0) return opt.judge_runs;
    return config.value("judge_runs", 3);
  }

  LlmHandle judge_handle() {
    LlmHandle handle = handle_for(pipeline, AgentBackends(judge_backend()), AgentRole::Judge, trace);
    return handle;
  }

  std::size_t jobs(std::size_t work) const {
    if (opt.jobs > 0) return opt.jobs;
    return std::clamp<std::size_t>(work, 1, 4);
  }

  void record_output(const fs::path& path) { manifest["outputs"].push_back(path.string()); }

  void write(const std::string& name, const std::string& contents) {
    if (opt.out.empty()) return;
    const fs::path path = fs::path(opt.out) / name;
    write_file(path, contents);
    record_output(path);
  }

  void finish(int exit_code, const std::string& error) {
    manifest["finished_at"] = utc_timestamp();
    manifest["exit_code"] = exit_code;
    manifest["error"] = error.empty() ? ordered_json(nullptr) : ordered_json(error);
    manifest["pipeline"] = to_json(pipeline);
    manifest["llm_calls"] = trace->size();
    if (!opt.out.empty()) {
      if (trace->size() > 0) write_file(fs::path(opt.out) / "trace.jsonl", trace->to_jsonl());
      write_file(fs::path(opt.out) / "manifest.json", manifest.dump(2) + "\n");
    }
  }

  const Options& opt;
  json config = json::object();
  fs::path config_dir;
  PipelineConfig pipeline;
  std::shared_ptr<TraceLog> trace = std::make_shared<TraceLog>();
  ordered_json manifest;

 private:
  BackendPtr pick_backend(const std::string& script, const std::string& id) {
    if (!script.empty()) return load_scripted_backend(script);
    if (id.empty()) raise(ErrorKind::InvalidConfig, "no backend: pass --script or --backend, or set one in --config");
    return registry().get(id);
  }

  std::optional<PromptLibrary> prompts_;
  std::optional<BackendRegistry> registry_;
  BackendPtr backend_;
  BackendPtr judge_backend_;
};

std::vector<Dialogue> load_dialogues(const std::vector<std::string>& paths) {
  std::vector<Dialogue> out;
  for (const std::string& raw : paths) {
    const fs::path path(raw);
    if (fs::is_directory(path)) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(path)) {
        if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& file : files) out.push_back(load_dialogue(file));
    } else {
      out.push_back(load_dialogue(path));
    }
  }
  return out;
}

std::vector<harness::SyntheticCase> synthetic_or_none(const Options& opt) {
  return opt.synthetic > 0 ? harness::synthetic_corpus(opt.synthetic, opt.seed) : std::vector<harness::SyntheticCase>{};
}

std::vector<Dialogue> input_dialogues(const Options& opt) {
  std::vector<Dialogue> out = load_dialogues(opt.dialogues);
  for (auto& c : synthetic_or_none(opt)) out.push_back(std::move(c.dialogue));
  if (out.empty()) raise(ErrorKind::InvalidValue, "no dialogues: pass --dialogue or --synthetic");
  return out;
}

std::string fmt(double value, int digits = 4) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f", digits, value);
  return buffer;
}

// ---------------------------------------------------------------------------

int cmd_summarize(Context& ctx, std::ostream& out) {
  std::vector<Dialogue> dialogues = input_dialogues(ctx.opt);
  if (!ctx.opt.redact.empty()) {
    const RedactionRuleSet rules = load_rule_set(ctx.opt.redact);
    for (Dialogue& d : dialogues) d = anonymize(d, rules);
  }
  const PromptLibrary& prompts = ctx.prompts();
  validate(ctx.pipeline);
  const AgentBackends backends(ctx.backend());
  if (ctx.opt.monolithic) {
    prompts.get("monolithic");
  } else {
    for (AgentRole role : {AgentRole::Draft, AgentRole::EvalAccuracy, AgentRole::EvalCompleteness,
                           AgentRole::EvalReadability, AgentRole::Refine, AgentRole::Redundancy}) {
      prompt_for(prompts, ctx.pipeline, role);
    }
  }
  if (ctx.opt.dry_run) {
    out << "dry run: " << dialogues.size() << " dialogue(s), config and prompts valid\n";
    return kExitOk;
  }

  const bool nested = dialogues.size() > 1;
  auto results = harness::parallel_map(dialogues.size(), ctx.jobs(dialogues.size()), [&](std::size_t i) {
    if (ctx.opt.monolithic) {
      PipelineResult result;
      result.trace = ctx.trace;
      LlmHandle handle = handle_for(ctx.pipeline, backends, AgentRole::Draft, ctx.trace);
      result.draft = run_monolithic(dialogues[i], prompts.get("monolithic"), handle);
      result.final_summary = result.draft;
      return result;
    }
    return run_pipeline(dialogues[i], ctx.pipeline, backends, prompts, ctx.trace);
  });

  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    const PipelineResult& result = results[i];
    if (!ctx.opt.out.empty()) {
      const fs::path dir = nested ? fs::path(ctx.opt.out) / dialogues[i].id : fs::path(ctx.opt.out);
      PipelineResult bundle = result;
      bundle.trace = nullptr;
      write_result_bundle(dir, bundle);
      ctx.record_output(dir / "final_summary.json");
    }
    if (nested) out << "== " << dialogues[i].id << "\n";
    for (const auto& sentence : result.final_summary.sentences) out << sentence.text << "\n";
    if (!ctx.opt.monolithic) {
      out << "(rounds " << result.rounds_executed << (result.terminated_early ? ", clean" : "") << ")\n";
    }
  }
  return kExitOk;
}

int cmd_judge(Context& ctx, std::ostream& out) {
  const std::vector<Dialogue> dialogues = load_dialogues(ctx.opt.dialogues);
  if (dialogues.size() != 1) raise(ErrorKind::InvalidValue, "judge takes exactly one --dialogue");
  const Summary summary = load_summary(ctx.opt.summary);
  validate(summary, dialogues[0]);
  const PromptTemplate& prompt = ctx.prompts().get("judge");
  LlmHandle handle = ctx.judge_handle();
  if (ctx.opt.dry_run) {
    out << "dry run: judge inputs valid\n";
    return kExitOk;
  }
  const DimensionScores scores = judge_summary(dialogues[0], summary, prompt, handle, ctx.judge_runs());
  const ordered_json report = scores_to_json(scores);
  ctx.write("scores.json", report.dump(2) + "\n");
  for (Dimension d : kAllDimensions) {
    out << to_string(d) << " " << fmt(scores[d].mean, 2) << " \xC2\xB1 " << fmt(scores[d].std, 2) << "\n";
  }
  return kExitOk;
}

std::vector<std::pair<Dialogue, Summary>> load_golds(const Options& opt) {
  std::vector<std::pair<Dialogue, Summary>> golds;
  if (!opt.golds.empty()) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(opt.golds)) {
      if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      fs::path summary_path = file;
      summary_path.replace_extension(".summary.json");
      if (!fs::exists(summary_path)) raise(ErrorKind::InvalidValue, "no gold summary " + summary_path.string());
      Dialogue dialogue = load_dialogue(file);
      Summary summary = load_summary(summary_path);
      validate(summary, dialogue);
      golds.emplace_back(std::move(dialogue), std::move(summary));
    }
  }
  for (auto& c : synthetic_or_none(opt)) golds.emplace_back(std::move(c.dialogue), std::move(c.summary));
  return golds;
}

int cmd_metaeval(Context& ctx, std::ostream& out) {
  const auto golds = load_golds(ctx.opt);
  const auto rules = harness::parse_rules(ctx.opt.rules);
  const auto dataset = harness::build_metaeval_set(golds, ctx.opt.perturb_fraction, rules, ctx.opt.seed);
  ctx.write("dataset.json", harness::metaeval_set_to_json(dataset).dump(2) + "\n");

  std::unique_ptr<harness::ScoreJudge> judge;
  const std::string& kind = ctx.opt.judge;
  if (kind == "scripted-oracle" || kind == "oracle") {
    judge = std::make_unique<harness::ManifestOracleJudge>(dataset);
  } else if (kind.rfind("constant:", 0) == 0) {
    try {
      judge = std::make_unique<harness::ConstantJudge>(std::stod(kind.substr(9)));
    } catch (const std::logic_error&) {
      raise(ErrorKind::InvalidValue, "bad constant judge '" + kind + "'");
    }
  } else if (kind == "llm") {
    judge = std::make_unique<harness::LlmJudge>(ctx.prompts().get("judge"), ctx.judge_handle(), ctx.judge_runs());
  } else {
    raise(ErrorKind::InvalidValue, "--judge must be scripted-oracle, constant:N or llm");
  }
  ctx.manifest["judge"] = judge->name();
  if (ctx.opt.dry_run) {
    out << "dry run: " << dataset.size() << " meta-evaluation instances\n";
    return kExitOk;
  }
  const harness::MaeReport report = harness::run_metaeval(dataset, *judge);
  ctx.write("mae_report.json", report.to_json().dump(2) + "\n");
  ctx.write("mae_report.txt", report.to_table());
  out << report.to_table();
  return kExitOk;
}

int cmd_calibrate(Context& ctx, std::ostream& out) {
  if (ctx.opt.data.empty()) raise(ErrorKind::InvalidValue, "calibrate needs --data");
  const harness::CalibrationSet set = harness::load_calibration_set(ctx.opt.data);
  const Dimension dimension = parse_dimension(ctx.opt.dimension);
  std::vector<harness::CalibrationExample> examples;
  std::copy_if(set.examples.begin(), set.examples.end(), std::back_inserter(examples),
               [dimension](const auto& e) { return e.dimension == dimension; });
  const PromptTemplate& prompt = prompt_for(ctx.prompts(), ctx.pipeline, evaluator_role(dimension));
  LlmHandle handle = handle_for(ctx.pipeline, AgentBackends(ctx.backend()), evaluator_role(dimension), ctx.trace);
  if (ctx.opt.dry_run) {
    out << "dry run: " << examples.size() << " " << to_string(dimension) << " examples\n";
    return kExitOk;
  }
  const auto outcome = harness::run_calibration(examples, dimension, set.items, prompt, handle);
  const auto& m = outcome.metrics;
  ordered_json report;
  report["dimension"] = to_string(dimension);
  report["examples"] = examples.size();
  report["accuracy"] = m.accuracy;
  report["precision"] = m.precision;
  report["recall"] = m.recall;
  report["f1"] = m.f1;
  report["precision_degenerate"] = m.precision_degenerate;
  report["recall_degenerate"] = m.recall_degenerate;
  report["confusion"] = {{"tp", m.true_positive}, {"fp", m.false_positive}, {"tn", m.true_negative}, {"fn", m.false_negative}};
  ctx.write("calibration.json", report.dump(2) + "\n");
  out << to_string(dimension) << ": accuracy " << fmt(m.accuracy) << ", precision " << fmt(m.precision)
      << ", recall " << fmt(m.recall) << ", f1 " << fmt(m.f1) << "\n";
  return kExitOk;
}

int cmd_ablate(Context& ctx, std::ostream& out) {
  const std::vector<Dialogue> dialogues = input_dialogues(ctx.opt);
  std::vector<DimensionMask> masks;
  const std::vector<std::string> labels =
      ctx.opt.masks.empty() ? std::vector<std::string>{"full", "-A", "-C", "-R"} : ctx.opt.masks;
  for (const auto& label : labels) masks.push_back(DimensionMask::parse(label));
  const PromptLibrary& prompts = ctx.prompts();
  harness::JudgeSetup judge{prompts.get("judge"), ctx.judge_handle(), ctx.judge_runs()};
  const AgentBackends backends(ctx.backend());
  if (ctx.opt.dry_run) {
    out << "dry run: " << dialogues.size() << " dialogue(s) x " << masks.size() << " masks\n";
    return kExitOk;
  }
  const harness::ScoreTable table =
      harness::run_ablation(dialogues, ctx.pipeline, masks, backends, prompts, judge, ctx.jobs(dialogues.size()));
  ctx.write("ablation.json", table.to_json().dump(2) + "\n");
  ctx.write("ablation.txt", table.to_table("Mask"));
  out << table.to_table("Mask");
  return kExitOk;
}

int cmd_noise(Context& ctx, std::ostream& out) {
  const std::vector<Dialogue> dialogues = input_dialogues(ctx.opt);
  harness::NoiseSpec spec;
  spec.target_wer = ctx.opt.target_wer;
  spec.disfluency_rate = ctx.opt.disfluency_rate;
  spec.channel_merge = ctx.opt.channel_merge;
  spec.merge_probability = ctx.opt.merge_probability;
  harness::validate(spec);
  if (ctx.opt.dry_run) {
    out << "dry run: noise settings valid\n";
    return kExitOk;
  }
  ordered_json report = ordered_json::array();
  for (const Dialogue& dialogue : dialogues) {
    spec.seed = harness::derive_seed(ctx.opt.seed, dialogue.id);
    const harness::NoiseResult result = harness::inject_asr_noise(dialogue, spec);
    ctx.write(dialogue.id + ".noisy.jsonl", serialize_dialogue(result.noisy));
    report.push_back({{"dialogue_id", dialogue.id},
                      {"achieved_wer", result.achieved_wer},
                      {"word_edits", result.word_edits},
                      {"disfluencies", result.disfluencies},
                      {"merges", result.merges},
                      {"turns_before", dialogue.turns.size()},
                      {"turns_after", result.noisy.turns.size()}});
    out << dialogue.id << " achieved_wer " << fmt(result.achieved_wer) << "\n";
  }
  ctx.write("noise_report.json", report.dump(2) + "\n");
  return kExitOk;
}

std::string read_words_source(const std::string& path) {
  if (fs::path(path).extension() == ".jsonl") {
    std::string text;
    for (const Turn& turn : load_dialogue(path).turns) text += turn.text + "\n";
    return text;
  }
  return read_file(path);
}

int cmd_wer(Context& ctx, std::ostream& out) {
  if (ctx.opt.ref.empty() || ctx.opt.hyp.empty()) raise(ErrorKind::InvalidValue, "wer needs --ref and --hyp");
  const metrics::WerResult result = metrics::wer_text(read_words_source(ctx.opt.ref), read_words_source(ctx.opt.hyp));
  const auto& c = result.counts;
  out << json(result.rate).dump() << "\n";
  ordered_json report = {{"wer", result.rate},
                         {"substitutions", c.substitutions},
                         {"deletions", c.deletions},
                         {"insertions", c.insertions},
                         {"hits", c.hits},
                         {"reference_len", c.reference_len}};
  ctx.write("wer.json", report.dump(2) + "\n");
  return kExitOk;
}

std::map<std::string, Summary> load_summary_dir(const std::string& dir) {
  std::map<std::string, Summary> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    Summary summary = load_summary(entry.path());
    const std::string id = summary.dialogue_id;
    out[id] = std::move(summary);
  }
  return out;
}

int cmd_abtest_build(Context& ctx, std::ostream& out) {
  if (ctx.opt.out.empty()) raise(ErrorKind::InvalidValue, "abtest build needs --out (the service data directory)");
  if (ctx.opt.a_dir.empty() || ctx.opt.b_dir.empty()) raise(ErrorKind::InvalidValue, "abtest build needs --a and --b");
  std::map<std::string, Dialogue> dialogues;
  for (Dialogue& d : load_dialogues(ctx.opt.dialogues)) dialogues[d.id] = std::move(d);
  const auto a = load_summary_dir(ctx.opt.a_dir);
  const auto b = load_summary_dir(ctx.opt.b_dir);
  const harness::AbExperiment experiment =
      harness::make_ab_pairs(a, b, ctx.opt.seed, ctx.opt.experiment_id, ctx.opt.system_a, ctx.opt.system_b);
  if (ctx.opt.dry_run) {
    out << "dry run: " << experiment.pairs.size() << " pairs\n";
    return kExitOk;
  }
  const fs::path dir = fs::path(ctx.opt.out) / "experiments" / ctx.opt.experiment_id;
  harness::write_experiment(dir, experiment, dialogues);
  ctx.record_output(dir / "pairs.json");
  ctx.record_output(dir / "key.json");
  if (ctx.opt.attribution_tasks) {
    for (const auto& [id, summary] : a) {
      const auto dialogue = dialogues.find(id);
      if (dialogue == dialogues.end()) raise(ErrorKind::UnknownDialogue, "no dialogue for " + id);
      const fs::path path = fs::path(ctx.opt.out) / "attribution" / (id + ".json");
      ordered_json task = {{"dialogue", dialogue_to_json(dialogue->second)}, {"summary", summary_to_json(summary)}};
      write_file(path, task.dump(2) + "\n");
      ctx.record_output(path);
    }
  }
  out << "experiment " << ctx.opt.experiment_id << ": " << experiment.pairs.size() << " pairs\n";
  return kExitOk;
}

std::atomic<bool> g_stop_requested{false};

extern "C" void request_stop(int) { g_stop_requested = true; }

int cmd_abtest_serve(Context& ctx, std::ostream& out) {
  if (ctx.opt.data.empty()) raise(ErrorKind::InvalidValue, "abtest serve needs --data");
  service::AnnotationStore store(ctx.opt.data);
  std::optional<fs::path> static_dir;
  if (!ctx.opt.static_dir.empty()) static_dir = ctx.opt.static_dir;
  service::AnnotationServer server(store, static_dir);
  const int port = server.bind(ctx.opt.host, ctx.opt.port);
  if (ctx.opt.dry_run) {
    out << "dry run: data directory loads, port " << port << " available\n";
    return kExitOk;
  }
  g_stop_requested = false;
  std::signal(SIGINT, request_stop);
  std::signal(SIGTERM, request_stop);
  std::thread watcher([&server] {
    while (!g_stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  });
  out << "listening on http://" << ctx.opt.host << ":" << port << std::endl;
  server.run();
  g_stop_requested = true;
  watcher.join();
  return kExitOk;
}

int cmd_abtest_report(Context& ctx, std::ostream& out) {
  if (ctx.opt.data.empty()) raise(ErrorKind::InvalidValue, "abtest report needs --data");
  service::AnnotationStore store(ctx.opt.data);
  const std::string id = ctx.opt.experiment.empty() ? ctx.opt.experiment_id : ctx.opt.experiment;
  const service::ExperimentResults results = store.results(id);
  ctx.write("results.json", results.to_json().dump(2) + "\n");
  ctx.write("export.json", store.export_unblinded(id).dump(2) + "\n");
  const auto& r = results.rates;
  out << results.system_a << " preferred " << fmt(r.rate_a, 2) << " (95% CI " << fmt(r.wilson95_a.lo, 2) << "-"
      << fmt(r.wilson95_a.hi, 2) << "), " << results.system_b << " preferred " << fmt(r.rate_b, 2) << ", equal "
      << fmt(r.rate_tie, 2) << " over " << results.tally.total() << " judgments\n";
  return kExitOk;
}

int cmd_backend_matrix(Context& ctx, std::ostream& out) {
  const std::vector<Dialogue> dialogues = input_dialogues(ctx.opt);
  if (ctx.opt.variants.size() < 2) raise(ErrorKind::InvalidValue, "backend-matrix needs at least two --variant");
  std::vector<harness::BackendVariant> variants;
  for (const std::string& spec : ctx.opt.variants) {
    // label=backend_id[:reasoning]; with --script the backend id may be empty.
    const auto eq = spec.find('=');
    if (eq == std::string::npos) raise(ErrorKind::InvalidValue, "variant '" + spec + "' is not label=backend[:level]");
    harness::BackendVariant variant;
    variant.label = spec.substr(0, eq);
    std::string target = spec.substr(eq + 1);
    if (const auto colon = target.rfind(':'); colon != std::string::npos) {
      variant.reasoning_level = parse_reasoning_level(target.substr(colon + 1));
      target = target.substr(0, colon);
    }
    variant.backend = (target.empty() || !ctx.opt.script.empty()) ? ctx.backend() : ctx.registry().get(target);
    ctx.manifest["backend_ids"]["variants"][variant.label] = variant.backend->id();
    variants.push_back(std::move(variant));
  }
  const PromptLibrary& prompts = ctx.prompts();
  harness::JudgeSetup judge{prompts.get("judge"), ctx.judge_handle(), ctx.judge_runs()};
  if (ctx.opt.dry_run) {
    out << "dry run: " << variants.size() << " backend variants\n";
    return kExitOk;
  }
  const harness::ScoreTable table = harness::run_backend_matrix(dialogues, ctx.pipeline, variants, prompts, judge,
                                                                ctx.jobs(dialogues.size()));
  ctx.write("backend_matrix.json", table.to_json().dump(2) + "\n");
  ctx.write("backend_matrix.txt", table.to_table("Backend"));
  out << table.to_table("Backend");
  return kExitOk;
}

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.config, "Config document (pipeline, backends, prompts)");
  cmd->add_option("--out", opt.out, "Output directory");
  cmd->add_option("--seed", opt.seed, "Seed for every random choice");
  cmd->add_option("--jobs", opt.jobs, "Parallel dialogues");
  cmd->add_option("--backend", opt.backend, "Backend id from the config registry");
  cmd->add_option("--script", opt.script, "Scripted backend document (offline)");
  cmd->add_option("--judge-script", opt.judge_script, "Scripted backend for judge calls");
  cmd->add_option("--prompts", opt.prompts, "Prompt template directory");
  cmd->add_option("--n-rounds", opt.n_rounds, "Maximum revision rounds")->check(CLI::PositiveNumber);
  cmd->add_option("--mask", opt.mask, "Evaluator mask, e.g. full, -A, A,C");
  cmd->add_option("--judge-runs", opt.judge_runs, "Judge runs per summary")->check(CLI::PositiveNumber);
  cmd->add_option("--target-wer", opt.target_wer, "Noise target word error rate");
  cmd->add_flag("--dry-run", opt.dry_run, "Validate inputs without any model call");
}

void add_dialogue_inputs(CLI::App* cmd, Options& opt) {
  cmd->add_option("--dialogue", opt.dialogues, "Transcript file or directory (repeatable)");
  cmd->add_option("--synthetic", opt.synthetic, "Add N generated support-call dialogues");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Agentic dialogue summarization and evaluation toolkit", "refine_loop"};
  app.require_subcommand(1);

  auto* summarize = app.add_subcommand("summarize", "Draft, evaluate and refine summaries");
  add_dialogue_inputs(summarize, opt);
  summarize->add_flag("--monolithic", opt.monolithic, "Single-call baseline instead of the agent loop");
  summarize->add_option("--redact", opt.redact, "Redaction rule set applied before summarizing");

  auto* judge = app.add_subcommand("judge", "Score a summary 1-5 per dimension");
  add_dialogue_inputs(judge, opt);
  judge->add_option("--summary", opt.summary, "Summary document")->required();

  auto* metaeval = app.add_subcommand("metaeval", "Judge meta-evaluation with injected errors");
  metaeval->add_option("--golds", opt.golds, "Directory of <id>.jsonl + <id>.summary.json");
  metaeval->add_option("--synthetic", opt.synthetic, "Add N generated gold pairs");
  metaeval->add_option("--rules", opt.rules, "default or a comma list of error rules");
  metaeval->add_option("--judge", opt.judge, "scripted-oracle, constant:N or llm");
  metaeval->add_option("--perturb-fraction", opt.perturb_fraction, "Share of golds that get errors");

  auto* calibrate = app.add_subcommand("calibrate", "Evaluator accuracy against gold sentence labels");
  calibrate->add_option("--data", opt.data, "Calibration set document")->required();
  calibrate->add_option("--dimension", opt.dimension, "accuracy, completeness or readability");

  auto* ablate = app.add_subcommand("ablate", "Evaluator ablation table");
  add_dialogue_inputs(ablate, opt);
  ablate->add_option("--masks", opt.masks, "Masks to compare (default: full -A -C -R)");

  auto* noise = app.add_subcommand("noise", "Simulate transcription noise");
  add_dialogue_inputs(noise, opt);
  noise->add_option("--disfluency-rate", opt.disfluency_rate, "Per-turn filler probability");
  noise->add_flag("--channel-merge", opt.channel_merge, "Merge adjacent turns of different speakers");
  noise->add_option("--merge-probability", opt.merge_probability, "Merge probability per adjacent pair");

  auto* wer = app.add_subcommand("wer", "Word error rate between two texts");
  wer->add_option("--ref", opt.ref, "Reference text or transcript")->required();
  wer->add_option("--hyp", opt.hyp, "Hypothesis text or transcript")->required();

  auto* abtest = app.add_subcommand("abtest", "Blinded A/B preference experiments");
  abtest->require_subcommand(1);
  auto* build = abtest->add_subcommand("build", "Write blinded pairs and the unblinding key");
  build->add_option("--dialogue", opt.dialogues, "Transcript file or directory (repeatable)");
  build->add_option("--a", opt.a_dir, "Directory of system A summaries")->required();
  build->add_option("--b", opt.b_dir, "Directory of system B summaries")->required();
  build->add_option("--experiment-id", opt.experiment_id, "Experiment id");
  build->add_option("--system-a", opt.system_a, "Name of system A");
  build->add_option("--system-b", opt.system_b, "Name of system B");
  build->add_flag("--attribution-tasks", opt.attribution_tasks, "Also write attribution tasks for system A");
  auto* serve = abtest->add_subcommand("serve", "Run the annotation service");
  serve->add_option("--data", opt.data, "Service data directory")->required();
  serve->add_option("--host", opt.host, "Bind address");
  serve->add_option("--port", opt.port, "Port (0 picks a free one)");
  serve->add_option("--static", opt.static_dir, "Annotator UI files served under /");
  auto* report = abtest->add_subcommand("report", "Tally preferences");
  report->add_option("--data", opt.data, "Service data directory")->required();
  report->add_option("--experiment", opt.experiment, "Experiment id")->required();

  auto* matrix = app.add_subcommand("backend-matrix", "Same pipeline across backends");
  add_dialogue_inputs(matrix, opt);
  matrix->add_option("--variant", opt.variants, "label=backend_id[:reasoning_level] (repeatable)");

  for (CLI::App* cmd : {summarize, judge, metaeval, calibrate, ablate, noise, wer, build, serve, report, matrix}) {
    add_common(cmd, opt);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  std::string command;
  int (*handler)(Context&, std::ostream&) = nullptr;
  const std::vector<std::pair<CLI::App*, int (*)(Context&, std::ostream&)>> table = {
      {summarize, cmd_summarize}, {judge, cmd_judge},     {metaeval, cmd_metaeval},    {calibrate, cmd_calibrate},
      {ablate, cmd_ablate},       {noise, cmd_noise},     {wer, cmd_wer},              {build, cmd_abtest_build},
      {serve, cmd_abtest_serve},  {report, cmd_abtest_report}, {matrix, cmd_backend_matrix}};
  for (const auto& [cmd, fn] : table) {
    if (cmd->parsed()) {
      command = (cmd->get_parent() == abtest ? "abtest " : "") + cmd->get_name();
      handler = fn;
    }
  }

  std::optional<Context> ctx;
  int code = kExitOk;
  std::string error;
  try {
    ctx.emplace(opt, command);
    ctx->manifest["argv"] = args;
    code = handler(*ctx, out);
  } catch (const Error& e) {
    error = e.what();
    code = kExitDomainError;
  } catch (const std::exception& e) {
    error = e.what();
    code = kExitDomainError;
  }
  if (!error.empty()) err << "refine_loop " << command << ": " << error << "\n";
  try {
    if (ctx) {
      ctx->finish(code, error);
    } else if (!opt.out.empty()) {
      ordered_json manifest = {{"command", command}, {"argv", args}, {"finished_at", utc_timestamp()},
                               {"exit_code", code},  {"error", error}};
      write_file(fs::path(opt.out) / "manifest.json", manifest.dump(2) + "\n");
    }
  } catch (const std::exception& e) {
    err << "refine_loop: could not write the run manifest: " << e.what() << "\n";
    if (code == kExitOk) code = kExitDomainError;
  }
  return code;
}

}  // namespace refine_loop::cli
