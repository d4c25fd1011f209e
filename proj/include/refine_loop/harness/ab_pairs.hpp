#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "refine_loop/core/model.hpp"

namespace refine_loop::harness {

struct BlindedPair {
  std::string pair_id;
  std::string dialogue_id;
  Summary left;
  Summary right;
};

/// Kept apart from the pairs so annotators never see system identities.
struct UnblindingKey {
  std::string experiment_id;
  std::string system_a;
  std::string system_b;
  // pair_id -> whether system A is shown on the left.
  std::map<std::string, bool> a_on_left;
};

struct AbExperiment {
  std::string experiment_id;
  std::vector<BlindedPair> pairs;
  UnblindingKey key;
};

/// One pair per dialogue id, numbered "pair-001"... in sorted id order.
/// Exactly ceil(n/2) pairs show A on the left, assigned by seeded shuffle.
/// Throws KeyMismatch when the two maps cover different dialogues.
AbExperiment make_ab_pairs(const std::map<std::string, Summary>& a_outputs,
                           const std::map<std::string, Summary>& b_outputs, std::uint64_t seed,
                           std::string experiment_id = "experiment", std::string system_a = "A",
                           std::string system_b = "B");

// Summary of system A (true) or B (false) for a pair, via the key.
const Summary& unblind(const BlindedPair& pair, const UnblindingKey& key, bool system_a);

nlohmann::ordered_json key_to_json(const UnblindingKey& key);
UnblindingKey key_from_json(const nlohmann::json& object);

/// pairs.json: {"experiment_id", "pairs": [{"pair_id", "dialogue", "left", "right"}]}.
/// Dialogues are embedded so the annotation service can show them.
nlohmann::ordered_json pairs_to_json(const AbExperiment& experiment, const std::map<std::string, Dialogue>& dialogues);

/// Writes <directory>/pairs.json and, when `with_key`, <directory>/key.json.
void write_experiment(const std::filesystem::path& directory, const AbExperiment& experiment,
                      const std::map<std::string, Dialogue>& dialogues, bool with_key = true);

}  // namespace refine_loop::harness
