#include "refine_loop/harness/ab_pairs.hpp"

#include <cstdio>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/io.hpp"
#include "refine_loop/harness/rng.hpp"

namespace refine_loop::harness {

AbExperiment make_ab_pairs(const std::map<std::string, Summary>& a_outputs,
                           const std::map<std::string, Summary>& b_outputs, std::uint64_t seed,
                           std::string experiment_id, std::string system_a, std::string system_b) {
  for (const auto& entry : a_outputs) {
    if (!b_outputs.contains(entry.first)) raise(ErrorKind::KeyMismatch, "system B has no output for " + entry.first);
  }
  for (const auto& entry : b_outputs) {
    if (!a_outputs.contains(entry.first)) raise(ErrorKind::KeyMismatch, "system A has no output for " + entry.first);
  }
  if (system_a == system_b) raise(ErrorKind::InvalidValue, "the two systems need distinct names");

  const std::size_t n = a_outputs.size();
  std::vector<char> a_first(n, 0);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) a_first[i] = 1;
  Rng rng(derive_seed(seed, "ab/" + experiment_id));
  rng.shuffle(a_first);

  AbExperiment out;
  out.experiment_id = experiment_id;
  out.key = {std::move(experiment_id), std::move(system_a), std::move(system_b), {}};
  std::size_t i = 0;
  for (const auto& [dialogue_id, a] : a_outputs) {
    char pair_id[32];
    std::snprintf(pair_id, sizeof pair_id, "pair-%03zu", i + 1);
    const Summary& b = b_outputs.at(dialogue_id);
    const bool left_is_a = a_first[i] != 0;
    out.pairs.push_back({pair_id, dialogue_id, left_is_a ? a : b, left_is_a ? b : a});
    out.key.a_on_left[pair_id] = left_is_a;
    ++i;
  }
  return out;
}

const Summary& unblind(const BlindedPair& pair, const UnblindingKey& key, bool system_a) {
  const auto it = key.a_on_left.find(pair.pair_id);
  if (it == key.a_on_left.end()) raise(ErrorKind::UnknownPair, "key has no entry for " + pair.pair_id);
  return it->second == system_a ? pair.left : pair.right;
}

nlohmann::ordered_json key_to_json(const UnblindingKey& key) {
  nlohmann::ordered_json out;
  out["experiment_id"] = key.experiment_id;
  out["systems"] = {{"A", key.system_a}, {"B", key.system_b}};
  out["pairs"] = nlohmann::ordered_json::object();
  for (const auto& [pair_id, left] : key.a_on_left) out["pairs"][pair_id] = {{"a_on_left", left}};
  return out;
}

UnblindingKey key_from_json(const nlohmann::json& object) {
  try {
    UnblindingKey key;
    key.experiment_id = object.at("experiment_id").get<std::string>();
    key.system_a = object.at("systems").at("A").get<std::string>();
    key.system_b = object.at("systems").at("B").get<std::string>();
    for (const auto& [pair_id, entry] : object.at("pairs").items()) {
      key.a_on_left[pair_id] = entry.at("a_on_left").get<bool>();
    }
    return key;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::MalformedRecord, std::string("unblinding key: ") + e.what());
  }
}

nlohmann::ordered_json pairs_to_json(const AbExperiment& experiment, const std::map<std::string, Dialogue>& dialogues) {
  nlohmann::ordered_json out;
  out["experiment_id"] = experiment.experiment_id;
  out["pairs"] = nlohmann::ordered_json::array();
  for (const BlindedPair& pair : experiment.pairs) {
    const auto dialogue = dialogues.find(pair.dialogue_id);
    if (dialogue == dialogues.end()) raise(ErrorKind::UnknownDialogue, "no dialogue for " + pair.dialogue_id);
    out["pairs"].push_back({{"pair_id", pair.pair_id},
                            {"dialogue", dialogue_to_json(dialogue->second)},
                            {"left", summary_to_json(pair.left)},
                            {"right", summary_to_json(pair.right)}});
  }
  return out;
}

void write_experiment(const std::filesystem::path& directory, const AbExperiment& experiment,
                      const std::map<std::string, Dialogue>& dialogues, bool with_key) {
  write_file(directory / "pairs.json", pairs_to_json(experiment, dialogues).dump(2) + "\n");
  if (with_key) write_file(directory / "key.json", key_to_json(experiment.key).dump(2) + "\n");
}

}  // namespace refine_loop::harness
