#include "refine_loop/harness/metaeval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "refine_loop/autoeval/autoeval.hpp"
#include "refine_loop/core/error.hpp"
#include "refine_loop/core/io.hpp"
#include "refine_loop/metrics/metrics.hpp"

namespace refine_loop::harness {

std::vector<MetaevalInstance> build_metaeval_set(std::span<const std::pair<Dialogue, Summary>> golds,
                                                 double perturb_fraction, const std::vector<ErrorRule>& rules,
                                                 std::uint64_t seed, const SentenceRewriter& rewriter) {
  if (golds.size() < 2) raise(ErrorKind::InsufficientGolds, "meta-evaluation needs at least two gold summaries");
  if (!(perturb_fraction >= 0.0 && perturb_fraction <= 1.0)) {
    raise(ErrorKind::InvalidValue, "perturb_fraction must lie in [0, 1]");
  }
  const auto perturbed_count =
      static_cast<std::size_t>(std::floor(perturb_fraction * static_cast<double>(golds.size()) + 1e-9));

  std::vector<std::size_t> order(golds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng select(derive_seed(seed, "metaeval/select"));
  select.shuffle(order);
  std::vector<bool> perturb(golds.size(), false);
  for (std::size_t i = 0; i < perturbed_count; ++i) perturb[order[i]] = true;

  std::vector<MetaevalInstance> out;
  out.reserve(golds.size());
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto& [dialogue, gold] = golds[i];
    MetaevalInstance instance{dialogue, gold, {5, 5, 5}, std::nullopt};
    if (perturb[i]) {
      const std::uint64_t stream = derive_seed(seed, "metaeval/" + std::to_string(i) + "/" + dialogue.id);
      Rng rng(stream);
      const int count = rng.between(1, 3);
      auto [summary, manifest] = inject_errors(gold, dialogue, rules, count, rng.next(), rewriter);
      for (Dimension d : kAllDimensions) {
        instance.gold_scores[index_of(d)] = std::max(1, 5 - static_cast<int>(manifest.count(d)));
      }
      instance.summary = std::move(summary);
      instance.manifest = std::move(manifest);
    }
    out.push_back(std::move(instance));
  }
  return out;
}

nlohmann::ordered_json metaeval_set_to_json(std::span<const MetaevalInstance> dataset) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const MetaevalInstance& instance : dataset) {
    nlohmann::ordered_json entry;
    entry["dialogue_id"] = instance.dialogue.id;
    entry["gold_scores"] = {{"accuracy", instance.gold_scores[0]},
                            {"completeness", instance.gold_scores[1]},
                            {"readability", instance.gold_scores[2]}};
    entry["summary"] = summary_to_json(instance.summary);
    entry["manifest"] = instance.manifest ? manifest_to_json(*instance.manifest) : nlohmann::ordered_json(nullptr);
    out.push_back(std::move(entry));
  }
  return out;
}

ManifestOracleJudge::ManifestOracleJudge(std::span<const MetaevalInstance> dataset) {
  for (const MetaevalInstance& instance : dataset) {
    gold_.emplace(instance.dialogue.id, std::make_pair(instance.summary, instance.gold_scores));
  }
}

std::array<double, 3> ManifestOracleJudge::score(const Dialogue& dialogue, const Summary& summary) {
  const auto [begin, end] = gold_.equal_range(dialogue.id);
  for (auto it = begin; it != end; ++it) {
    if (it->second.first == summary) {
      const auto& g = it->second.second;
      return {static_cast<double>(g[0]), static_cast<double>(g[1]), static_cast<double>(g[2])};
    }
  }
  raise(ErrorKind::UnknownDialogue, "oracle has no gold scores for this summary of " + dialogue.id);
}

std::string ConstantJudge::name() const {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "constant:%g", value_);
  return buffer;
}

LlmJudge::LlmJudge(PromptTemplate prompt, LlmHandle llm, int k) : prompt_(std::move(prompt)), llm_(std::move(llm)), k_(k) {}

std::array<double, 3> LlmJudge::score(const Dialogue& dialogue, const Summary& summary) {
  return judge_summary(dialogue, summary, prompt_, llm_, k_).means();
}

MaeReport make_mae_report(const std::array<double, 3>& per_dimension, std::size_t instances) {
  MaeReport report;
  report.mae = per_dimension;
  report.average = (per_dimension[0] + per_dimension[1] + per_dimension[2]) / 3.0;
  report.instances = instances;
  return report;
}

nlohmann::ordered_json MaeReport::to_json() const {
  nlohmann::ordered_json out;
  out["instances"] = instances;
  out["rows"] = nlohmann::ordered_json::array();
  for (Dimension d : kAllDimensions) out["rows"].push_back({{"row", to_string(d)}, {"mae", mae[index_of(d)]}});
  out["rows"].push_back({{"row", "Average"}, {"mae", average}});
  return out;
}

std::string MaeReport::to_table() const {
  std::string out = "Dimension      MAE\n";
  char line[64];
  for (Dimension d : kAllDimensions) {
    std::snprintf(line, sizeof line, "%-13s %5.2f\n", std::string(to_string(d)).c_str(), mae[index_of(d)]);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-13s %5.2f\n", "Average", average);
  return out + line;
}

MaeReport run_metaeval(std::span<const MetaevalInstance> dataset, ScoreJudge& judge) {
  if (dataset.empty()) raise(ErrorKind::EmptyInput, "empty meta-evaluation set");
  std::array<std::vector<double>, 3> predicted;
  std::array<std::vector<double>, 3> gold;
  for (const MetaevalInstance& instance : dataset) {
    const auto scores = judge.score(instance.dialogue, instance.summary);
    for (std::size_t d = 0; d < 3; ++d) {
      predicted[d].push_back(scores[d]);
      gold[d].push_back(instance.gold_scores[d]);
    }
  }
  std::array<double, 3> per_dimension{};
  for (std::size_t d = 0; d < 3; ++d) per_dimension[d] = metrics::mae(predicted[d], gold[d]);
  return make_mae_report(per_dimension, dataset.size());
}

}  // namespace refine_loop::harness
