#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "refine_loop/agents/agents.hpp"
#include "refine_loop/core/model.hpp"
#include "refine_loop/harness/error_injection.hpp"

namespace refine_loop::harness {

struct MetaevalInstance {
  Dialogue dialogue;
  Summary summary;
  // Indexed by Dimension.
  std::array<int, 3> gold_scores{5, 5, 5};
  std::optional<ErrorManifest> manifest;
};

/// floor(perturb_fraction * n) golds, picked by seeded shuffle, receive 1 to 3
/// injected errors; their gold score drops one point per error on the
/// targeted dimension (floor 1). The rest keep 5 everywhere. Output order
/// follows the input. Throws InsufficientGolds for fewer than two golds.
std::vector<MetaevalInstance> build_metaeval_set(std::span<const std::pair<Dialogue, Summary>> golds,
                                                 double perturb_fraction, const std::vector<ErrorRule>& rules,
                                                 std::uint64_t seed,
                                                 const SentenceRewriter& rewriter = rule_based_rewrite);

nlohmann::ordered_json metaeval_set_to_json(std::span<const MetaevalInstance> dataset);

/// Anything that scores a summary 1..5 on each dimension.
class ScoreJudge {
 public:
  virtual ~ScoreJudge() = default;
  virtual std::string name() const = 0;
  virtual std::array<double, 3> score(const Dialogue& dialogue, const Summary& summary) = 0;
};

// Returns the constructed gold scores; looks instances up by dialogue id and summary.
class ManifestOracleJudge final : public ScoreJudge {
 public:
  explicit ManifestOracleJudge(std::span<const MetaevalInstance> dataset);
  std::string name() const override { return "scripted-oracle"; }
  std::array<double, 3> score(const Dialogue& dialogue, const Summary& summary) override;

 private:
  std::multimap<std::string, std::pair<Summary, std::array<int, 3>>> gold_;
};

class ConstantJudge final : public ScoreJudge {
 public:
  explicit ConstantJudge(double value) : value_(value) {}
  std::string name() const override;
  std::array<double, 3> score(const Dialogue&, const Summary&) override { return {value_, value_, value_}; }

 private:
  double value_;
};

// Mean of k judge_summary runs.
class LlmJudge final : public ScoreJudge {
 public:
  LlmJudge(PromptTemplate prompt, LlmHandle llm, int k = 3);
  std::string name() const override { return "llm"; }
  std::array<double, 3> score(const Dialogue& dialogue, const Summary& summary) override;

 private:
  PromptTemplate prompt_;
  LlmHandle llm_;
  int k_;
};

/// Per-dimension MAE plus their mean, laid out as Accuracy, Completeness,
/// Readability, Average rows.
struct MaeReport {
  std::array<double, 3> mae{};
  double average = 0.0;
  std::size_t instances = 0;

  nlohmann::ordered_json to_json() const;
  // Two-decimal text table.
  std::string to_table() const;
};

MaeReport make_mae_report(const std::array<double, 3>& per_dimension, std::size_t instances = 0);

MaeReport run_metaeval(std::span<const MetaevalInstance> dataset, ScoreJudge& judge);

}  // namespace refine_loop::harness
