#include "refine_loop/harness/calibration.hpp"

#include <algorithm>
#include <set>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/io.hpp"

namespace refine_loop::harness {

CalibrationSet parse_calibration_set(std::string_view document) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(document);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::MalformedRecord, std::string("calibration set: ") + e.what());
  }
  CalibrationSet out;
  try {
    for (const auto& item : root.at("items")) {
      Dialogue dialogue = dialogue_from_json(item.at("dialogue"));
      Summary summary = summary_from_json(item.at("summary"));
      validate(summary, dialogue);
      for (const auto& label : item.value("labels", nlohmann::json::array())) {
        out.examples.push_back({dialogue.id, label.at("sentence_index").get<std::size_t>(),
                                parse_dimension(label.at("dimension").get<std::string>()),
                                parse_label(label.at("gold_label").get<std::string>())});
      }
      const std::string id = dialogue.id;
      if (!out.items.emplace(id, std::make_pair(std::move(dialogue), std::move(summary))).second) {
        raise(ErrorKind::MalformedRecord, "calibration set lists dialogue " + id + " twice");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::MalformedRecord, std::string("calibration set: ") + e.what());
  }
  return out;
}

CalibrationSet load_calibration_set(const std::filesystem::path& path) {
  return parse_calibration_set(read_file(path));
}

CalibrationOutcome run_calibration(std::span<const CalibrationExample> examples, Dimension dimension,
                                   const std::map<std::string, std::pair<Dialogue, Summary>>& items,
                                   const PromptTemplate& prompt, const LlmHandle& llm) {
  if (examples.empty()) raise(ErrorKind::EmptyInput, "no calibration examples");
  std::set<std::string> ids;
  for (const CalibrationExample& example : examples) {
    if (example.dimension != dimension) {
      raise(ErrorKind::InvalidValue, "calibration example for " + std::string(to_string(example.dimension)) +
                                         " in a " + std::string(to_string(dimension)) + " run");
    }
    if (!items.contains(example.dialogue_id)) {
      raise(ErrorKind::UnknownDialogue, "no dialogue '" + example.dialogue_id + "' in the calibration set");
    }
    ids.insert(example.dialogue_id);
  }

  std::map<std::string, std::vector<SentenceFeedback>> labels;
  for (const std::string& id : ids) {
    const auto& [dialogue, summary] = items.at(id);
    labels[id] = evaluate_dimension(dialogue, summary, dimension, prompt, llm);
  }

  CalibrationOutcome out;
  for (const CalibrationExample& example : examples) {
    const auto& feedback = labels.at(example.dialogue_id);
    const auto it = std::find_if(feedback.begin(), feedback.end(), [&example](const SentenceFeedback& f) {
      return f.sentence_index == example.sentence_index;
    });
    if (it == feedback.end() || it->defaulted) {
      raise(ErrorKind::MissingSentence, "evaluator gave no label for sentence " +
                                            std::to_string(example.sentence_index) + " of " + example.dialogue_id);
    }
    out.predicted.push_back(it->label);
    out.gold.push_back(example.gold_label);
  }
  out.metrics = metrics::classification_metrics(out.predicted, out.gold);
  return out;
}

}  // namespace refine_loop::harness
